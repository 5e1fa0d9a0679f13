#pragma once

#include <array>
#include <vector>

#include "bidenv/data.hpp"
#include "bidenv/embedding.hpp"
#include "bidenv/tensor.hpp"

namespace bidenv {

// One post-norm self-attention block: softmax(Q K^T / sqrt(D/H) + mask) V,
// residual + layer norm, then a shared position-wise FFN (D -> 4D -> D,
// rectifier) with another residual + layer norm.
struct AttentionBlockParams {
    Tensor wq, wk, wv;       // [D x D]
    Tensor ffn_w1, ffn_b1;   // [D x 4D], [1 x 4D]
    Tensor ffn_w2, ffn_b2;   // [4D x D], [1 x D]
    Tensor ln1_g, ln1_b;     // [1 x D]
    Tensor ln2_g, ln2_b;     // [1 x D]

    void init(int d_model, Rng& rng);
    void register_params(ParamRegistry& reg, const std::string& prefix) const;
};

// gate MLP shared across targets: [.. x 2D] -> 4D -> D pre-activations
struct FusionParams {
    Tensor w1, b1;  // [2D x 4D], [1 x 4D]
    Tensor w2, b2;  // [4D x D], [1 x D]

    void init(int d_model, Rng& rng);
    void register_params(ParamRegistry& reg, const std::string& prefix) const;
};

// additive mask [n x n]: causal upper triangle and/or padded key columns set
// to the effective -infinity; empty valid_mask means "no padding"
Tensor make_attention_mask(int n, bool causal, const std::vector<double>& valid_mask);

// one block applied to x [N x D]; mask may be undefined for full attention
Tensor attention_block(const Tensor& x, const AttentionBlockParams& p, const Tensor& mask,
                       int n_heads);

// n_layers full-attention blocks over the C0 variable tokens
Tensor variable_encoder(const Tensor& z_hist, const std::vector<AttentionBlockParams>& blocks,
                        int n_heads);

// n_layers causally masked blocks over the T today tokens; pad rows are
// zeroed after the stack so they contribute nothing downstream
Tensor temporal_decoder(const Tensor& z_today, const std::vector<double>& valid_mask,
                        const std::vector<AttentionBlockParams>& blocks, int n_heads);

// per target i: gate = sigmoid(MLP(concat(repeat(h_var[i]), h_tem))),
// output_i = gate (.) h_tem. h_var rows are selected by the fixed variable
// indices of the three targets.
std::array<Tensor, kNumTargets> variable_aware_fusion(const Tensor& h_var, const Tensor& h_tem,
                                                      const FusionParams& p);

}  // namespace bidenv
