// Times the OpenMP kernel entry points against their serial twins on a few
// representative shapes and verifies the outputs stay bit-identical. Run with
// OMP_NUM_THREADS set to see the scaling; on one thread the two columns
// should be near-equal (the parallel path adds only loop-scheduling overhead).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "bidenv/kernels.hpp"
#include "bidenv/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace bidenv;

namespace {

std::vector<double> random_buf(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        f();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Row {
    std::string name;
    double par_ms;
    double ser_ms;
    bool identical;
};

}  // namespace

int main(int argc, char** argv) {
    int reps = argc > 1 ? std::atoi(argv[1]) : 5;
    if (reps < 1) reps = 1;
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run the same serial code\n");
#endif

    Rng rng(20240901);
    std::vector<Row> rows;

    struct MatShape {
        std::size_t m, k, n;
    };
    for (MatShape s : {MatShape{48, 64, 64}, MatShape{256, 256, 256}, MatShape{512, 512, 512}}) {
        std::vector<double> a = random_buf(s.m * s.k, rng);
        std::vector<double> b = random_buf(s.k * s.n, rng);
        std::vector<double> cp(s.m * s.n), cs(s.m * s.n);
        char name[64];
        std::snprintf(name, sizeof name, "matmul_nn %zux%zux%zu", s.m, s.k, s.n);
        double par = time_best_of(reps, [&] { kern::matmul_nn(s.m, s.k, s.n, a.data(),
                                                              b.data(), cp.data()); });
        double ser = time_best_of(reps, [&] { kern::ref::matmul_nn(s.m, s.k, s.n, a.data(),
                                                                   b.data(), cs.data()); });
        rows.push_back({name, par, ser, bitwise_equal(cp, cs)});
    }

    {
        std::size_t m = 512, k = 512, n = 512;
        std::vector<double> a = random_buf(m * k, rng);
        std::vector<double> b = random_buf(n * k, rng);  // transposed operand
        std::vector<double> cp(m * n), cs(m * n);
        double par = time_best_of(
            reps, [&] { kern::matmul_nt(m, k, n, a.data(), b.data(), cp.data()); });
        double ser = time_best_of(
            reps, [&] { kern::ref::matmul_nt(m, k, n, a.data(), b.data(), cs.data()); });
        rows.push_back({"matmul_nt 512x512x512", par, ser, bitwise_equal(cp, cs)});

        std::vector<double> at = random_buf(k * m, rng);
        double par2 = time_best_of(
            reps, [&] { kern::matmul_tn(m, k, n, at.data(), b.data(), cp.data()); });
        double ser2 = time_best_of(
            reps, [&] { kern::ref::matmul_tn(m, k, n, at.data(), b.data(), cs.data()); });
        rows.push_back({"matmul_tn 512x512x512", par2, ser2, bitwise_equal(cp, cs)});
    }

    {
        std::size_t r = 4096, c = 512;
        std::vector<double> x = random_buf(r * c, rng);
        std::vector<double> yp(r * c), ys(r * c);
        double par =
            time_best_of(reps, [&] { kern::softmax_rows(r, c, x.data(), yp.data()); });
        double ser =
            time_best_of(reps, [&] { kern::ref::softmax_rows(r, c, x.data(), ys.data()); });
        rows.push_back({"softmax_rows 4096x512", par, ser, bitwise_equal(yp, ys)});

        std::vector<double> gain = random_buf(c, rng), bias = random_buf(c, rng);
        std::vector<double> mp(r), sp(r), ms(r), ss(r);
        double lp = time_best_of(reps, [&] {
            kern::layer_norm_rows(r, c, x.data(), gain.data(), bias.data(), 1e-5, yp.data(),
                                  mp.data(), sp.data());
        });
        double ls = time_best_of(reps, [&] {
            kern::ref::layer_norm_rows(r, c, x.data(), gain.data(), bias.data(), 1e-5,
                                       ys.data(), ms.data(), ss.data());
        });
        rows.push_back({"layer_norm_rows 4096x512", lp, ls, bitwise_equal(yp, ys)});
    }

    std::printf("\n%-26s %12s %12s %9s %10s\n", "kernel", "parallel ms", "serial ms",
                "speedup", "identical");
    bool all_same = true;
    for (const Row& r : rows) {
        std::printf("%-26s %12.3f %12.3f %8.2fx %10s\n", r.name.c_str(), r.par_ms, r.ser_ms,
                    r.ser_ms / r.par_ms, r.identical ? "yes" : "NO");
        all_same = all_same && r.identical;
    }
    if (!all_same) {
        std::printf("\nparallel and serial outputs differ\n");
        return 1;
    }
    return 0;
}
