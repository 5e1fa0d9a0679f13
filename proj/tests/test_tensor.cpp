#include <cmath>
#include <cstring>

#include "bidenv/gradcheck.hpp"
#include "bidenv/rng.hpp"
#include "bidenv/tensor.hpp"
#include "doctest.h"

using namespace bidenv;

namespace {

Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng, bool rg = true) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.5, 1.5);
    return Tensor::from(std::move(shape), std::move(v), rg);
}

// finite-difference check of a scalar-valued graph builder over its leaves
void check_grads(std::vector<std::pair<std::string, Tensor>> leaves,
                 const std::function<Tensor()>& build) {
    Tensor loss = build();
    for (auto& [n, t] : leaves) t.zero_grad();
    backward(loss);
    auto rep = finite_diff_check(
        leaves, [&] { return build().item(); }, 0, 17);
    CAPTURE(rep.worst);
    CHECK(rep.max_rel_err < kGradCheckTol);
}

}  // namespace

TEST_CASE("matmul identity and value") {
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    auto out = matmul(a, eye);
    for (int i = 0; i < 4; ++i) CHECK(out.at(i) == a.at(i));

    auto r = Tensor::from({1, 2}, {1, 2});
    auto c = Tensor::from({2, 1}, {3, 4});
    CHECK(matmul(r, c).item() == doctest::Approx(11.0));
}

TEST_CASE("matmul shape error names both shapes") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({2, 3});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    try {
        matmul(a, b);
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
    }
}

TEST_CASE("grad of sum(a*b) w.r.t. a is b^T") {
    auto a = Tensor::from({1, 2}, {1, 2}, true);
    auto b = Tensor::from({2, 1}, {3, 4}, true);
    auto loss = sum(matmul(a, b));
    backward(loss);
    CHECK(a.grad()[0] == doctest::Approx(3.0));
    CHECK(a.grad()[1] == doctest::Approx(4.0));
    CHECK(b.grad()[0] == doctest::Approx(1.0));
    CHECK(b.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("softmax frozen values") {
    auto x = Tensor::from({3}, {1, 2, 3});
    auto y = softmax_lastdim(x);
    CHECK(y.at(0) == doctest::Approx(0.09003057).epsilon(1e-5));
    CHECK(y.at(1) == doctest::Approx(0.24472847).epsilon(1e-5));
    CHECK(y.at(2) == doctest::Approx(0.66524096).epsilon(1e-5));
    double s = y.at(0) + y.at(1) + y.at(2);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax shift invariance") {
    Rng rng(5);
    std::vector<double> v(7);
    for (auto& x : v) x = rng.uniform(-3, 3);
    auto y0 = softmax_lastdim(Tensor::from({7}, v));
    for (auto& x : v) x += 123.25;
    auto y1 = softmax_lastdim(Tensor::from({7}, v));
    for (int i = 0; i < 7; ++i) CHECK(y0.at(i) == doctest::Approx(y1.at(i)).epsilon(1e-12));
}

TEST_CASE("masked softmax: masked entries exactly zero, full mask row all zero") {
    auto x = Tensor::from({2, 3}, {0.5, kNegInf, 1.0, kNegInf, kNegInf, kNegInf});
    auto y = softmax_lastdim(x);
    CHECK(y.at(0, 1) == 0.0);
    CHECK(y.at(0, 0) + y.at(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y.at(1, 0) == 0.0);
    CHECK(y.at(1, 1) == 0.0);
    CHECK(y.at(1, 2) == 0.0);
}

TEST_CASE("sigmoid value and derivative at 1") {
    auto x = Tensor::from({1}, {1.0}, true);
    auto y = sigmoid(x);
    CHECK(y.item() == doctest::Approx(0.73106).epsilon(1e-5));
    backward(sum(y));
    CHECK(x.grad()[0] == doctest::Approx(0.19661).epsilon(1e-4));
}

TEST_CASE("sigmoid is stable at extreme inputs") {
    auto y = sigmoid(Tensor::from({2}, {800.0, -800.0}));
    CHECK(y.at(0) == doctest::Approx(1.0));
    CHECK(y.at(1) == doctest::Approx(0.0));
    CHECK(std::isfinite(y.at(0)));
    CHECK(std::isfinite(y.at(1)));
}

TEST_CASE("layer_norm frozen example") {
    auto x = Tensor::from({2}, {0.0, 2.0});
    auto g = Tensor::full({2}, 1.0);
    auto b = Tensor::zeros({2});
    auto y = layer_norm(x, g, b, 0.0);
    CHECK(y.at(0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(y.at(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("layer_norm constant row maps to bias with eps") {
    auto x = Tensor::full({4}, 3.25);
    auto g = Tensor::full({4}, 2.0);
    auto b = Tensor::full({4}, -0.5);
    auto y = layer_norm(x, g, b, 1e-5);
    for (int i = 0; i < 4; ++i) CHECK(y.at(i) == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("broadcast_add frozen example") {
    auto m = Tensor::from({2, 2}, {1, 1, 2, 2});
    auto v = Tensor::from({2}, {10, 20});
    auto y = broadcast_add(m, v);
    CHECK(y.at(0, 0) == 11.0);
    CHECK(y.at(0, 1) == 21.0);
    CHECK(y.at(1, 0) == 12.0);
    CHECK(y.at(1, 1) == 22.0);
}

TEST_CASE("elementwise values") {
    auto a = Tensor::from({3}, {1, -2, 3});
    auto b = Tensor::from({3}, {4, 5, -6});
    auto s = add(a, b);
    CHECK(s.at(0) == 5.0);
    CHECK(s.at(1) == 3.0);
    auto d = sub(a, b);
    CHECK(d.at(2) == 9.0);
    auto p = mul(a, b);
    CHECK(p.at(1) == -10.0);
    auto r = relu(a);
    CHECK(r.at(1) == 0.0);
    CHECK(r.at(2) == 3.0);
    auto q = square(a);
    CHECK(q.at(1) == 4.0);
    CHECK(mean(q).item() == doctest::Approx((1.0 + 4.0 + 9.0) / 3.0));
    CHECK(sum(b).item() == doctest::Approx(3.0));
    auto c = clamp(a, -1.0, 2.0);
    CHECK(c.at(0) == 1.0);
    CHECK(c.at(1) == -1.0);
    CHECK(c.at(2) == 2.0);
    CHECK(log_elem(Tensor::from({1}, {std::exp(2.0)})).item() == doctest::Approx(2.0));
}

TEST_CASE("concat_lastdim and slicing round trip") {
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto b = Tensor::from({2, 1}, {9, 8});
    auto c = concat_lastdim(a, b);
    CHECK(c.shape()[1] == 3);
    CHECK(c.at(0, 2) == 9.0);
    CHECK(c.at(1, 0) == 3.0);
    auto back = col_slice(c, 0, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(back.at(i, j) == a.at(i, j));
    auto row1 = select_row(a, 1);
    CHECK(row1.at(0, 0) == 3.0);
    auto rep = repeat_rows(row1, 3);
    CHECK(rep.rows() == 3);
    CHECK(rep.at(2, 1) == 4.0);
}

TEST_CASE("backward requires scalar loss") {
    auto a = Tensor::from({2}, {1, 2}, true);
    CHECK_THROWS_AS(backward(add(a, a)), ContractError);
}

TEST_CASE("backward rejects non-finite loss naming the op") {
    auto a = Tensor::from({1}, {-1.0}, true);
    auto loss = sum(log_elem(a));  // log(-1) = nan
    try {
        backward(loss);
        CHECK(false);
    } catch (const NumericError& e) {
        std::string msg = e.what();
        CHECK(msg.find("log") != std::string::npos);
    }
}

TEST_CASE("gradient accumulation is additive across backward calls") {
    auto a = Tensor::from({1}, {2.0}, true);
    auto l1 = sum(square(a));
    backward(l1);
    CHECK(a.grad()[0] == doctest::Approx(4.0));
    auto l2 = sum(square(a));
    backward(l2);
    CHECK(a.grad()[0] == doctest::Approx(8.0));
    a.zero_grad();
    CHECK(a.grad()[0] == 0.0);
}

TEST_CASE("backward is deterministic bit for bit") {
    Rng rng(99);
    auto a = rand_tensor({4, 6}, rng);
    auto b = rand_tensor({6, 5}, rng);
    auto g = rand_tensor({5}, rng);
    auto bias = rand_tensor({5}, rng);
    auto build = [&] {
        auto h = layer_norm(matmul(a, b), g, bias, 1e-5);
        return sum(mul(sigmoid(h), h));
    };
    auto run = [&](std::vector<double>& ga, std::vector<double>& gb) {
        a.zero_grad();
        b.zero_grad();
        backward(build());
        ga = a.grad();
        gb = b.grad();
    };
    std::vector<double> ga1, gb1, ga2, gb2;
    run(ga1, gb1);
    run(ga2, gb2);
    CHECK(std::memcmp(ga1.data(), ga2.data(), ga1.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(gb1.data(), gb2.data(), gb1.size() * sizeof(double)) == 0);
}

TEST_CASE("finite differences: matmul chain") {
    Rng rng(1);
    auto a = rand_tensor({3, 4}, rng);
    auto b = rand_tensor({4, 2}, rng);
    check_grads({{"a", a}, {"b", b}}, [&] { return sum(square(matmul(a, b))); });
}

TEST_CASE("finite differences: softmax + log") {
    Rng rng(2);
    auto x = rand_tensor({3, 5}, rng);
    check_grads({{"x", x}}, [&] {
        auto p = clamp(softmax_lastdim(x), 1e-7, 1.0);
        return sum(mul(p, log_elem(p)));
    });
}

TEST_CASE("finite differences: layer_norm") {
    Rng rng(3);
    auto x = rand_tensor({4, 6}, rng);
    auto g = rand_tensor({6}, rng);
    auto b = rand_tensor({6}, rng);
    check_grads({{"x", x}, {"g", g}, {"b", b}},
                [&] { return sum(square(layer_norm(x, g, b, 1e-5))); });
}

TEST_CASE("finite differences: elementwise suite") {
    Rng rng(4);
    auto a = rand_tensor({2, 7}, rng);
    auto b = rand_tensor({2, 7}, rng);
    check_grads({{"a", a}, {"b", b}}, [&] {
        auto h = add(mul(sigmoid(a), relu(b)), scale(sub(a, b), 0.5));
        return mean(square(h));
    });
}

TEST_CASE("finite differences: softplus and clamp interior") {
    Rng rng(6);
    auto a = rand_tensor({9}, rng);
    check_grads({{"a", a}}, [&] { return sum(softplus(a)); });
    // clamp: keep all entries strictly interior so FD is valid
    auto c = Tensor::from({3}, {0.1, -0.4, 0.9}, true);
    check_grads({{"c", c}}, [&] { return sum(square(clamp(c, -1.0, 1.0))); });
}

TEST_CASE("finite differences: broadcast, concat, rows") {
    Rng rng(7);
    auto m = rand_tensor({3, 4}, rng);
    auto v = rand_tensor({4}, rng);
    auto w = rand_tensor({3, 2}, rng);
    check_grads({{"m", m}, {"v", v}, {"w", w}}, [&] {
        auto h = concat_lastdim(broadcast_add(m, v), w);  // 3 x 6
        auto r = repeat_rows(select_row(h, 1), 2);
        return sum(mul(r, r));
    });
}

TEST_CASE("finite differences: transpose and attention pattern") {
    Rng rng(8);
    auto q = rand_tensor({4, 3}, rng);
    auto k = rand_tensor({4, 3}, rng);
    auto v = rand_tensor({4, 3}, rng);
    check_grads({{"q", q}, {"k", k}, {"v", v}}, [&] {
        auto att = softmax_lastdim(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(3.0)));
        return sum(square(matmul(att, v)));
    });
}

TEST_CASE("finite differences: masked attention ignores masked grads") {
    Rng rng(9);
    auto q = rand_tensor({3, 2}, rng);
    auto k = rand_tensor({3, 2}, rng);
    // causal mask
    std::vector<double> mv(9, 0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) mv[i * 3 + j] = kNegInf;
    auto m = Tensor::from({3, 3}, mv);
    check_grads({{"q", q}, {"k", k}}, [&] {
        auto att = softmax_lastdim(add(matmul(q, transpose(k)), m));
        return sum(square(att));
    });
}

TEST_CASE("reshape keeps values and grads flowing") {
    auto a = Tensor::from({1, 4}, {1, 2, 3, 4}, true);
    auto r = reshape(a, {4});
    CHECK(r.shape().size() == 1);
    backward(sum(square(r)));
    CHECK(a.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("every reachable requires_grad tensor has a populated grad") {
    auto a = Tensor::from({2}, {1, 2}, true);
    auto b = Tensor::from({2}, {0, 0}, true);
    auto loss = sum(add(a, mul(b, Tensor::zeros({2}))));  // b's grad is zero but allocated
    backward(loss);
    CHECK(b.grad().size() == 2);
    CHECK(b.grad()[0] == 0.0);
}

TEST_CASE("no-grad guard suppresses the tape") {
    auto a = Tensor::from({2}, {1, 2}, true);
    NoGradGuard ng;
    auto y = square(a);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
}
