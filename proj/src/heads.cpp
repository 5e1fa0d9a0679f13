#include "bidenv/heads.hpp"

#include <cmath>

namespace bidenv {

namespace {

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape[0] * shape[1]);
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from(std::move(shape), std::move(v), /*requires_grad=*/true);
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    return broadcast_add(matmul(x, w), b);
}

Tensor two_layer_scalar(const Tensor& h, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                        const Tensor& b2) {
    return affine(relu(affine(h, w1, b1)), w2, b2);  // [T x D] -> [T x 1]
}

}  // namespace

void TargetHeadParams::init(int d_model, Rng& rng) {
    std::size_t d = static_cast<std::size_t>(d_model);
    auto make = [&](Tensor& w1, Tensor& b1, Tensor& w2, Tensor& b2) {
        w1 = uniform_init({d, d}, d, rng);
        b1 = Tensor::zeros({1, d}, true);
        w2 = uniform_init({d, 1}, d, rng);
        b2 = Tensor::zeros({1, 1}, true);
    };
    make(cls_w1, cls_b1, cls_w2, cls_b2);
    make(val_w1, val_b1, val_w2, val_b2);
    make(cum_w1, cum_b1, cum_w2, cum_b2);
}

void TargetHeadParams::register_params(ParamRegistry& reg, const std::string& prefix) const {
    auto put = [&](const char* name, const Tensor& t) { reg.emplace_back(prefix + name, t); };
    put(".cls_w1", cls_w1);
    put(".cls_b1", cls_b1);
    put(".cls_w2", cls_w2);
    put(".cls_b2", cls_b2);
    put(".val_w1", val_w1);
    put(".val_b1", val_b1);
    put(".val_w2", val_w2);
    put(".val_b2", val_b2);
    put(".cum_w1", cum_w1);
    put(".cum_b1", cum_b1);
    put(".cum_w2", cum_w2);
    put(".cum_b2", cum_b2);
}

TargetPrediction predict_target(const Tensor& h_i, const TargetHeadParams& p, bool nonneg_value) {
    TargetPrediction out;
    out.p = sigmoid(two_layer_scalar(h_i, p.cls_w1, p.cls_b1, p.cls_w2, p.cls_b2));
    out.y_tilde = two_layer_scalar(h_i, p.val_w1, p.val_b1, p.val_w2, p.val_b2);
    if (nonneg_value) out.y_tilde = softplus(out.y_tilde);
    out.y_hat = mul(out.p, out.y_tilde);
    out.y_cum = two_layer_scalar(h_i, p.cum_w1, p.cum_b1, p.cum_w2, p.cum_b2);
    return out;
}

namespace {

double mask_total(const Tensor& valid_mask) {
    double n = 0.0;
    for (double m : valid_mask.values()) n += m;
    if (n <= 0.0) throw ContractError("loss: mask has no valid slots");
    return n;
}

}  // namespace

ZipLossParts zip_loss(const Tensor& p, const Tensor& y_hat, const Tensor& nonzero_indicator,
                      const Tensor& y_norm, const Tensor& valid_mask) {
    double n = mask_total(valid_mask);
    Tensor pc = clamp(p, kProbClamp, 1.0 - kProbClamp);
    Tensor one = Tensor::full(pc.shape(), 1.0);
    Tensor ce = add(mul(nonzero_indicator, log_elem(pc)),
                    mul(sub(one, nonzero_indicator), log_elem(sub(one, pc))));
    ZipLossParts parts;
    parts.bce = scale(sum(mul(ce, valid_mask)), -1.0 / n);
    parts.mse = scale(sum(mul(square(sub(y_hat, y_norm)), valid_mask)), 1.0 / n);
    parts.total = add(parts.bce, parts.mse);
    return parts;
}

Tensor masked_mse(const Tensor& pred, const Tensor& target, const Tensor& valid_mask) {
    double n = mask_total(valid_mask);
    return scale(sum(mul(square(sub(pred, target)), valid_mask)), 1.0 / n);
}

}  // namespace bidenv
