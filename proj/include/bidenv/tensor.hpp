#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "bidenv/errors.hpp"

namespace bidenv {

// Effective -infinity for additive attention masks. The most negative finite
// double instead of a real infinity, so masked-score arithmetic never
// produces NaN; softmax treats anything at or below a quarter of it as
// masked and emits probability exactly 0 there.
inline constexpr double kNegInf = -std::numeric_limits<double>::max();

// One tape node: eager value plus a closure that scatters the node's grad
// into its parents. 64-bit floats everywhere.
struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized on demand during backward
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward;
    std::vector<double> aux;  // op-specific forward cache (layer_norm mean/rstd, ...)

    std::size_t numel() const { return value.size(); }
};

// Scoped switch that turns the tape off (pure value computation, no parents,
// no closures). Used for evaluation passes.
class NoGradGuard {
  public:
    NoGradGuard() { ++depth(); }
    ~NoGradGuard() { --depth(); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
    static bool grad_enabled() { return depth() == 0; }

  private:
    static int& depth() {
        thread_local int d = 0;
        return d;
    }
};

class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double v, bool requires_grad = false);
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->numel(); }
    // 2-D helpers; a 1-D tensor counts as a single row
    std::size_t rows() const;
    std::size_t cols() const;

    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& mutable_values() { return node_->value; }
    double item() const;
    double at(std::size_t i) const { return node_->value.at(i); }
    double at(std::size_t i, std::size_t j) const { return node_->value.at(i * cols() + j); }

    bool requires_grad() const { return node_->requires_grad; }
    const std::vector<double>& grad() const;
    void zero_grad();

    const std::shared_ptr<TensorNode>& node() const { return node_; }

  private:
    std::shared_ptr<TensorNode> node_;
};

std::string shape_str(const std::vector<std::size_t>& s);

// --- ops (eager forward, tape-recorded backward) ---

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor scale(const Tensor& a, double c);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor softplus(const Tensor& a);
Tensor mean(const Tensor& a);  // full reduction to a scalar
Tensor sum(const Tensor& a);   // full reduction to a scalar
Tensor concat_lastdim(const Tensor& a, const Tensor& b);
// matrix [r x c] + vector of length c added to every row
Tensor broadcast_add(const Tensor& m, const Tensor& v);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
Tensor softmax_lastdim(const Tensor& x);
Tensor select_row(const Tensor& x, std::size_t i);           // [r x c] -> [1 x c]
Tensor repeat_rows(const Tensor& x, std::size_t n);          // [1 x c] -> [n x c]
Tensor col_slice(const Tensor& x, std::size_t c0, std::size_t c1);
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);

// Reverse pass from a scalar loss. Grads accumulate additively into every
// reachable requires_grad tensor (callers zero param grads between steps).
// Rejects non-finite losses with an error naming the op that first produced
// a non-finite value.
void backward(const Tensor& loss);

}  // namespace bidenv
