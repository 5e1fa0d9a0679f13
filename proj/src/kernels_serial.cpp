#include "bidenv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

// Serial reference kernels. Same loop structure as the OpenMP versions minus
// the pragmas; kept for bitwise-equality tests and as the baseline in the
// kernel benchmark.

namespace bidenv::kern::ref {

namespace {
constexpr double kMaskCut = -0.25 * std::numeric_limits<double>::max();
}

void matmul_nn(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* c, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            if (accumulate)
                c[i * n + j] += s;
            else
                c[i * n + j] = s;
        }
    }
}

void matmul_tn(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        if (!accumulate) std::fill(crow, crow + n, 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            double av = a[p * m + i];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xi = x + r * cols;
        double* yi = y + r * cols;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cols; ++j)
            if (xi[j] > kMaskCut && xi[j] > mx) mx = xi[j];
        if (mx == -std::numeric_limits<double>::infinity()) {
            std::fill(yi, yi + cols, 0.0);
            continue;
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            yi[j] = xi[j] > kMaskCut ? std::exp(xi[j] - mx) : 0.0;
            sum += yi[j];
        }
        double inv = 1.0 / sum;
        for (std::size_t j = 0; j < cols; ++j) yi[j] *= inv;
    }
}

void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x,
                     const double* gain, const double* bias, double eps,
                     double* y, double* mean_cache, double* rstd_cache) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xi = x + r * cols;
        double* yi = y + r * cols;
        double mean = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mean += xi[j];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double d = xi[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        double rstd = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < cols; ++j)
            yi[j] = (xi[j] - mean) * rstd * gain[j] + bias[j];
        if (mean_cache) mean_cache[r] = mean;
        if (rstd_cache) rstd_cache[r] = rstd;
    }
}

}  // namespace bidenv::kern::ref
