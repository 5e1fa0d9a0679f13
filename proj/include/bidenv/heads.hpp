#pragma once

#include <array>

#include "bidenv/data.hpp"
#include "bidenv/embedding.hpp"
#include "bidenv/tensor.hpp"

namespace bidenv {

inline constexpr double kProbClamp = 1e-7;

// Per-target projection heads, each a two-layer map D -> D -> 1:
//   cls: non-zero probability logit, val: conditional value, cum: slot-to-end
//   cumulative value.
struct TargetHeadParams {
    Tensor cls_w1, cls_b1, cls_w2, cls_b2;
    Tensor val_w1, val_b1, val_w2, val_b2;
    Tensor cum_w1, cum_b1, cum_w2, cum_b2;

    void init(int d_model, Rng& rng);
    void register_params(ParamRegistry& reg, const std::string& prefix) const;
};

// per-slot predictions for one target, each [T x 1]
struct TargetPrediction {
    Tensor p;        // probability the outcome is non-zero
    Tensor y_tilde;  // conditional (non-zero branch) value, normalized scale
    Tensor y_hat;    // p * y_tilde, the expectation under the two-branch mixture
    Tensor y_cum;    // cumulative value from this slot to the end of the day
};

// nonneg_value applies a softplus to y_tilde (off by default; the conditional
// mean of a non-negative outcome is non-negative, but the normalized scale
// admits negative values, so the constraint is a config experiment)
TargetPrediction predict_target(const Tensor& h_i, const TargetHeadParams& p, bool nonneg_value);

// Zero-inflated loss for one target over one sample:
//   per valid slot  BCE(p, 1{y_raw != 0}) + (y_hat - y_norm)^2
// averaged over valid slots. p is clamped to [kProbClamp, 1-kProbClamp]. The
// indicator comes from RAW values (a normalized zero is a non-zero constant).
// Throws ContractError when the mask has no valid slots.
struct ZipLossParts {
    Tensor bce;    // scalar
    Tensor mse;    // scalar
    Tensor total;  // bce + mse
};
ZipLossParts zip_loss(const Tensor& p, const Tensor& y_hat, const Tensor& nonzero_indicator,
                      const Tensor& y_norm, const Tensor& valid_mask);

// masked mean squared error over valid slots (cumulative head objective)
Tensor masked_mse(const Tensor& pred, const Tensor& target, const Tensor& valid_mask);

// scalar-per-part loss summary for logging; total = zip + gamma * cum
struct LossReport {
    double total = 0.0;
    double zip = 0.0;
    double bce = 0.0;
    double mse = 0.0;
    double cum = 0.0;
    std::array<double, kNumTargets> target_bce{};
    std::array<double, kNumTargets> target_mse{};
    std::array<double, kNumTargets> target_cum{};
    long valid_slots = 0;
};

}  // namespace bidenv
