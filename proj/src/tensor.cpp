#include "bidenv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "bidenv/kernels.hpp"

namespace bidenv {

namespace {

std::shared_ptr<TensorNode> make_node(std::vector<std::size_t> shape, std::size_t numel,
                                      const char* op) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value.resize(numel);
    n->op = op;
    return n;
}

std::size_t shape_numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

// Attach parents + closure when the tape is live and any parent needs grads.
void wire(const std::shared_ptr<TensorNode>& out,
          std::initializer_list<std::shared_ptr<TensorNode>> parents,
          std::function<void(TensorNode&)> fn) {
    if (!NoGradGuard::grad_enabled()) return;
    bool any = false;
    for (const auto& p : parents) any = any || p->requires_grad;
    if (!any) return;
    out->requires_grad = true;
    out->parents.assign(parents);
    out->backward = std::move(fn);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// grad buffer of a parent, sized on first touch
std::vector<double>& pgrad(const std::shared_ptr<TensorNode>& p) {
    if (p->grad.size() != p->value.size()) p->grad.assign(p->value.size(), 0.0);
    return p->grad;
}

struct Dims2 {
    std::size_t r, c;
};

Dims2 as2d(const Tensor& t, const char* op) {
    const auto& s = t.shape();
    if (s.size() == 1) return {1, s[0]};
    if (s.size() == 2) return {s[0], s[1]};
    throw ShapeError(std::string(op) + ": expected 1-D or 2-D, got " + shape_str(s));
}

Tensor unary_map(const Tensor& a, const char* op, const std::function<double(double)>& f,
                 // dx given (x, y, upstream)
                 const std::function<double(double, double, double)>& df) {
    auto out = make_node(a.shape(), a.numel(), op);
    const auto& x = a.values();
    for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = f(x[i]);
    wire(out, {a.node()}, [df](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = pgrad(p);
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += df(p->value[i], self.value[i], self.grad[i]);
    });
    return Tensor(out);
}

}  // namespace

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string r;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) r += "x";
        r += std::to_string(s[i]);
    }
    return r.empty() ? "scalar" : r;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    auto node = make_node(std::move(shape), n, "leaf");
    node->requires_grad = requires_grad && NoGradGuard::grad_enabled();
    return Tensor(node);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v, bool requires_grad) {
    auto t = zeros(std::move(shape), requires_grad);
    std::fill(t.node_->value.begin(), t.node_->value.end(), v);
    return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data,
                    bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw ShapeError("from: data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    auto node = make_node(std::move(shape), data.size(), "leaf");
    node->value = std::move(data);
    node->requires_grad = requires_grad && NoGradGuard::grad_enabled();
    return Tensor(node);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

std::size_t Tensor::rows() const { return as2d(*this, "rows").r; }
std::size_t Tensor::cols() const { return as2d(*this, "cols").c; }

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item: tensor has " + std::to_string(numel()) + " elements");
    return node_->value[0];
}

const std::vector<double>& Tensor::grad() const {
    if (node_->grad.size() != node_->value.size())
        const_cast<TensorNode*>(node_.get())->grad.assign(node_->value.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
        throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " vs " + shape_str(sb));
    std::size_t m = sa[0], k = sa[1], n = sb[1];
    auto out = make_node({m, n}, m * n, "matmul");
    kern::matmul_nn(m, k, n, a.values().data(), b.values().data(), out->value.data());
    wire(out, {a.node(), b.node()}, [m, k, n](TensorNode& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad)
            kern::matmul_nt(m, n, k, self.grad.data(), pb->value.data(), pgrad(pa).data(), true);
        if (pb->requires_grad)
            kern::matmul_tn(k, m, n, pa->value.data(), self.grad.data(), pgrad(pb).data(), true);
    });
    return Tensor(out);
}

Tensor transpose(const Tensor& a) {
    auto [r, c] = as2d(a, "transpose");
    auto out = make_node({c, r}, r * c, "transpose");
    const auto& x = a.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out->value[j * r + i] = x[i * c + j];
    wire(out, {a.node()}, [r, c](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = pgrad(p);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
    });
    return Tensor(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto out = make_node(a.shape(), a.numel(), "add");
    const auto& x = a.values();
    const auto& y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = x[i] + y[i];
    wire(out, {a.node(), b.node()}, [](TensorNode& self) {
        for (int s = 0; s < 2; ++s) {
            auto& p = self.parents[s];
            if (!p->requires_grad) continue;
            auto& g = pgrad(p);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
    return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto out = make_node(a.shape(), a.numel(), "sub");
    const auto& x = a.values();
    const auto& y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = x[i] - y[i];
    wire(out, {a.node(), b.node()}, [](TensorNode& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pgrad(pa);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            auto& g = pgrad(pb);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
    return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto out = make_node(a.shape(), a.numel(), "mul");
    const auto& x = a.values();
    const auto& y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = x[i] * y[i];
    wire(out, {a.node(), b.node()}, [](TensorNode& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pgrad(pa);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            auto& g = pgrad(pb);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
        }
    });
    return Tensor(out);
}

Tensor scale(const Tensor& a, double c) {
    auto out = make_node(a.shape(), a.numel(), "scale");
    const auto& x = a.values();
    for (std::size_t i = 0; i < x.size(); ++i) out->value[i] = x[i] * c;
    wire(out, {a.node()}, [c](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = pgrad(p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * c;
    });
    return Tensor(out);
}

Tensor sigmoid(const Tensor& a) {
    return unary_map(
        a, "sigmoid",
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y, double g) { return g * y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
    return unary_map(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double, double g) { return x > 0.0 ? g : 0.0; });
}

Tensor square(const Tensor& a) {
    return unary_map(
        a, "square", [](double x) { return x * x; },
        [](double x, double, double g) { return 2.0 * x * g; });
}

Tensor log_elem(const Tensor& a) {
    return unary_map(
        a, "log", [](double x) { return std::log(x); },
        [](double x, double, double g) { return g / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary_map(
        a, "clamp", [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x, double, double g) { return (x > lo && x < hi) ? g : 0.0; });
}

Tensor softplus(const Tensor& a) {
    return unary_map(
        a, "softplus",
        [](double x) {
            if (x > 30.0) return x;
            if (x < -30.0) return std::exp(x);
            return std::log1p(std::exp(x));
        },
        [](double x, double, double g) {
            double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            return g * s;
        });
}

Tensor mean(const Tensor& a) {
    auto out = make_node({1}, 1, "mean");
    double s = 0.0;
    for (double v : a.values()) s += v;
    std::size_t n = a.numel();
    out->value[0] = s / static_cast<double>(n);
    wire(out, {a.node()}, [n](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = pgrad(p);
        double u = self.grad[0] / static_cast<double>(n);
        for (auto& v : g) v += u;
    });
    return Tensor(out);
}

Tensor sum(const Tensor& a) {
    auto out = make_node({1}, 1, "sum");
    double s = 0.0;
    for (double v : a.values()) s += v;
    out->value[0] = s;
    wire(out, {a.node()}, [](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = pgrad(p);
        for (auto& v : g) v += self.grad[0];
    });
    return Tensor(out);
}

Tensor concat_lastdim(const Tensor& a, const Tensor& b) {
    auto da = as2d(a, "concat_lastdim");
    auto db = as2d(b, "concat_lastdim");
    if (da.r != db.r)
        throw ShapeError("concat_lastdim: row mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    std::size_t r = da.r, ca = da.c, cb = db.c;
    auto out = make_node({r, ca + cb}, r * (ca + cb), "concat_lastdim");
    for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(a.values().data() + i * ca, ca, out->value.data() + i * (ca + cb));
        std::copy_n(b.values().data() + i * cb, cb, out->value.data() + i * (ca + cb) + ca);
    }
    wire(out, {a.node(), b.node()}, [r, ca, cb](TensorNode& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        for (std::size_t i = 0; i < r; ++i) {
            if (pa->requires_grad) {
                auto& g = pgrad(pa);
                for (std::size_t j = 0; j < ca; ++j) g[i * ca + j] += self.grad[i * (ca + cb) + j];
            }
            if (pb->requires_grad) {
                auto& g = pgrad(pb);
                for (std::size_t j = 0; j < cb; ++j)
                    g[i * cb + j] += self.grad[i * (ca + cb) + ca + j];
            }
        }
    });
    return Tensor(out);
}

Tensor broadcast_add(const Tensor& m, const Tensor& v) {
    auto dm = as2d(m, "broadcast_add");
    if (v.numel() != dm.c)
        throw ShapeError("broadcast_add: vector length " + shape_str(v.shape()) +
                         " does not match matrix " + shape_str(m.shape()));
    std::size_t r = dm.r, c = dm.c;
    auto out = make_node(m.shape(), r * c, "broadcast_add");
    const auto& x = m.values();
    const auto& y = v.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out->value[i * c + j] = x[i * c + j] + y[j];
    wire(out, {m.node(), v.node()}, [r, c](TensorNode& self) {
        auto& pm = self.parents[0];
        auto& pv = self.parents[1];
        if (pm->requires_grad) {
            auto& g = pgrad(pm);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pv->requires_grad) {
            auto& g = pgrad(pv);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
        }
    });
    return Tensor(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    auto d = as2d(x, "layer_norm");
    std::size_t r = d.r, c = d.c;
    if (gain.numel() != c || bias.numel() != c)
        throw ShapeError("layer_norm: gain/bias length must be " + std::to_string(c) + ", got " +
                         shape_str(gain.shape()) + " / " + shape_str(bias.shape()));
    auto out = make_node(x.shape(), r * c, "layer_norm");
    out->aux.resize(2 * r);  // per-row mean, rstd
    kern::layer_norm_rows(r, c, x.values().data(), gain.values().data(), bias.values().data(),
                          eps, out->value.data(), out->aux.data(), out->aux.data() + r);
    wire(out, {x.node(), gain.node(), bias.node()}, [r, c](TensorNode& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        const double* mean = self.aux.data();
        const double* rstd = self.aux.data() + r;
        for (std::size_t i = 0; i < r; ++i) {
            const double* xi = px->value.data() + i * c;
            const double* gi = self.grad.data() + i * c;
            const double* gv = pg->value.data();
            // xhat and gain-scaled upstream
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                double xh = (xi[j] - mean[i]) * rstd[i];
                double gh = gi[j] * gv[j];
                m1 += gh;
                m2 += gh * xh;
            }
            m1 /= static_cast<double>(c);
            m2 /= static_cast<double>(c);
            if (px->requires_grad) {
                auto& gx = pgrad(px);
                for (std::size_t j = 0; j < c; ++j) {
                    double xh = (xi[j] - mean[i]) * rstd[i];
                    double gh = gi[j] * gv[j];
                    gx[i * c + j] += (gh - m1 - xh * m2) * rstd[i];
                }
            }
            if (pg->requires_grad) {
                auto& gg = pgrad(pg);
                for (std::size_t j = 0; j < c; ++j)
                    gg[j] += gi[j] * (xi[j] - mean[i]) * rstd[i];
            }
            if (pb->requires_grad) {
                auto& gb = pgrad(pb);
                for (std::size_t j = 0; j < c; ++j) gb[j] += gi[j];
            }
        }
    });
    return Tensor(out);
}

Tensor softmax_lastdim(const Tensor& x) {
    const auto& s = x.shape();
    if (s.empty()) throw ShapeError("softmax_lastdim: scalar input");
    std::size_t c = s.back();
    std::size_t r = x.numel() / c;
    auto out = make_node(s, r * c, "softmax");
    kern::softmax_rows(r, c, x.values().data(), out->value.data());
    wire(out, {x.node()}, [r, c](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = pgrad(p);
        for (std::size_t i = 0; i < r; ++i) {
            const double* y = self.value.data() + i * c;
            const double* gy = self.grad.data() + i * c;
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += gy[j] * y[j];
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (gy[j] - dot);
        }
    });
    return Tensor(out);
}

Tensor select_row(const Tensor& x, std::size_t i) {
    auto d = as2d(x, "select_row");
    if (i >= d.r)
        throw ShapeError("select_row: row " + std::to_string(i) + " out of " +
                         std::to_string(d.r));
    auto out = make_node({1, d.c}, d.c, "select_row");
    std::copy_n(x.values().data() + i * d.c, d.c, out->value.data());
    wire(out, {x.node()}, [i, c = d.c](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = pgrad(p);
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j];
    });
    return Tensor(out);
}

Tensor repeat_rows(const Tensor& x, std::size_t n) {
    auto d = as2d(x, "repeat_rows");
    if (d.r != 1) throw ShapeError("repeat_rows: expected a single row, got " + shape_str(x.shape()));
    auto out = make_node({n, d.c}, n * d.c, "repeat_rows");
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(x.values().data(), d.c, out->value.data() + i * d.c);
    wire(out, {x.node()}, [n, c = d.c](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = pgrad(p);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
    });
    return Tensor(out);
}

Tensor col_slice(const Tensor& x, std::size_t c0, std::size_t c1) {
    auto d = as2d(x, "col_slice");
    if (c0 >= c1 || c1 > d.c)
        throw ShapeError("col_slice: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                         ") out of " + shape_str(x.shape()));
    std::size_t w = c1 - c0;
    auto out = make_node({d.r, w}, d.r * w, "col_slice");
    for (std::size_t i = 0; i < d.r; ++i)
        std::copy_n(x.values().data() + i * d.c + c0, w, out->value.data() + i * w);
    wire(out, {x.node()}, [c0, w, c = d.c, r = d.r](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = pgrad(p);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) g[i * c + c0 + j] += self.grad[i * w + j];
    });
    return Tensor(out);
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                         " changes element count");
    auto out = make_node(std::move(shape), x.numel(), "reshape");
    out->value = x.values();
    wire(out, {x.node()}, [](TensorNode& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = pgrad(p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    return Tensor(out);
}

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

std::vector<TensorNode*> topo_order(TensorNode* root) {
    // iterative post-order DFS; parents precede children in the result
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ContractError("backward: loss must be a defined scalar");
    auto order = topo_order(loss.node().get());
    if (!std::isfinite(loss.values()[0])) {
        for (TensorNode* n : order)
            if (!all_finite(n->value))
                throw NumericError(std::string("backward: non-finite loss; first produced by op '") +
                                   n->op + "'");
        throw NumericError("backward: non-finite loss");
    }
    if (!loss.node()->requires_grad) return;  // nothing reachable needs grads
    // fresh grad buffers for interior nodes; leaves (params) accumulate
    for (TensorNode* n : order)
        if (n->requires_grad && n->backward) n->grad.assign(n->value.size(), 0.0);
        else if (n->requires_grad && n->grad.size() != n->value.size())
            n->grad.assign(n->value.size(), 0.0);
    loss.node()->grad.assign(1, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward && n->requires_grad) n->backward(*n);
    }
}

}  // namespace bidenv
