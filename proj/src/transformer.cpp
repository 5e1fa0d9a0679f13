#include "bidenv/transformer.hpp"

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

constexpr double kLnEps = 1e-5;

}  // namespace

void AttentionBlockParams::init(int d_model, Rng& rng) {
    std::size_t d = static_cast<std::size_t>(d_model);
    std::size_t dff = 4 * d;
    wq = uniform_init({d, d}, d, rng);
    wk = uniform_init({d, d}, d, rng);
    wv = uniform_init({d, d}, d, rng);
    ffn_w1 = uniform_init({d, dff}, d, rng);
    ffn_b1 = Tensor::zeros({1, dff}, true);
    ffn_w2 = uniform_init({dff, d}, dff, rng);
    ffn_b2 = Tensor::zeros({1, d}, true);
    ln1_g = Tensor::full({1, d}, 1.0, true);
    ln1_b = Tensor::zeros({1, d}, true);
    ln2_g = Tensor::full({1, d}, 1.0, true);
    ln2_b = Tensor::zeros({1, d}, true);
}

void AttentionBlockParams::register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.emplace_back(prefix + ".wq", wq);
    reg.emplace_back(prefix + ".wk", wk);
    reg.emplace_back(prefix + ".wv", wv);
    reg.emplace_back(prefix + ".ffn_w1", ffn_w1);
    reg.emplace_back(prefix + ".ffn_b1", ffn_b1);
    reg.emplace_back(prefix + ".ffn_w2", ffn_w2);
    reg.emplace_back(prefix + ".ffn_b2", ffn_b2);
    reg.emplace_back(prefix + ".ln1_g", ln1_g);
    reg.emplace_back(prefix + ".ln1_b", ln1_b);
    reg.emplace_back(prefix + ".ln2_g", ln2_g);
    reg.emplace_back(prefix + ".ln2_b", ln2_b);
}

void FusionParams::init(int d_model, Rng& rng) {
    std::size_t d = static_cast<std::size_t>(d_model);
    w1 = uniform_init({2 * d, 4 * d}, 2 * d, rng);
    b1 = Tensor::zeros({1, 4 * d}, true);
    w2 = uniform_init({4 * d, d}, 4 * d, rng);
    b2 = Tensor::zeros({1, d}, true);
}

void FusionParams::register_params(ParamRegistry& reg, const std::string& prefix) const {
    reg.emplace_back(prefix + ".w1", w1);
    reg.emplace_back(prefix + ".b1", b1);
    reg.emplace_back(prefix + ".w2", w2);
    reg.emplace_back(prefix + ".b2", b2);
}

Tensor make_attention_mask(int n, bool causal, const std::vector<double>& valid_mask) {
    if (!valid_mask.empty() && static_cast<int>(valid_mask.size()) != n)
        throw ShapeError("make_attention_mask: mask length " +
                         std::to_string(valid_mask.size()) + " vs n " + std::to_string(n));
    std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            bool blocked = (causal && j > i) || (!valid_mask.empty() && valid_mask[j] == 0.0);
            if (blocked) m[static_cast<std::size_t>(i) * n + j] = kNegInf;
        }
    return Tensor::from({static_cast<std::size_t>(n), static_cast<std::size_t>(n)}, std::move(m));
}

Tensor attention_block(const Tensor& x, const AttentionBlockParams& p, const Tensor& mask,
                       int n_heads) {
    std::size_t d = x.cols();
    if (n_heads < 1 || d % static_cast<std::size_t>(n_heads) != 0)
        throw ContractError("attention_block: head count must divide the model width");
    std::size_t dh = d / static_cast<std::size_t>(n_heads);
    double inv_lambda = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor q = matmul(x, p.wq);
    Tensor k = matmul(x, p.wk);
    Tensor v = matmul(x, p.wv);

    Tensor att;
    for (int h = 0; h < n_heads; ++h) {
        std::size_t c0 = h * dh, c1 = (h + 1) * dh;
        Tensor qh = n_heads == 1 ? q : col_slice(q, c0, c1);
        Tensor kh = n_heads == 1 ? k : col_slice(k, c0, c1);
        Tensor vh = n_heads == 1 ? v : col_slice(v, c0, c1);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_lambda);
        if (mask.defined()) scores = add(scores, mask);
        Tensor head = matmul(softmax_lastdim(scores), vh);
        att = h == 0 ? head : concat_lastdim(att, head);
    }

    Tensor x1 = layer_norm(add(x, att), p.ln1_g, p.ln1_b, kLnEps);
    Tensor ff = affine(relu(affine(x1, p.ffn_w1, p.ffn_b1)), p.ffn_w2, p.ffn_b2);
    return layer_norm(add(x1, ff), p.ln2_g, p.ln2_b, kLnEps);
}

Tensor variable_encoder(const Tensor& z_hist, const std::vector<AttentionBlockParams>& blocks,
                        int n_heads) {
    if (blocks.empty()) throw ContractError("variable_encoder: need at least one block");
    Tensor h = z_hist;
    Tensor no_mask;
    for (const auto& b : blocks) h = attention_block(h, b, no_mask, n_heads);
    return h;
}

Tensor temporal_decoder(const Tensor& z_today, const std::vector<double>& valid_mask,
                        const std::vector<AttentionBlockParams>& blocks, int n_heads) {
    if (blocks.empty()) throw ContractError("temporal_decoder: need at least one block");
    int t = static_cast<int>(z_today.rows());
    Tensor mask = make_attention_mask(t, /*causal=*/true, valid_mask);
    Tensor h = z_today;
    for (const auto& b : blocks) h = attention_block(h, b, mask, n_heads);
    if (!valid_mask.empty()) {
        // zero pad rows so padding contributes nothing downstream
        std::vector<double> rows(static_cast<std::size_t>(t) * z_today.cols());
        for (int i = 0; i < t; ++i)
            for (std::size_t j = 0; j < z_today.cols(); ++j)
                rows[i * z_today.cols() + j] = valid_mask[i];
        h = mul(h, Tensor::from({static_cast<std::size_t>(t), z_today.cols()}, std::move(rows)));
    }
    return h;
}

std::array<Tensor, kNumTargets> variable_aware_fusion(const Tensor& h_var, const Tensor& h_tem,
                                                      const FusionParams& p) {
    if (h_var.rows() != kNumVariables)
        throw ShapeError("variable_aware_fusion: h_var is " + shape_str(h_var.shape()));
    std::array<Tensor, kNumTargets> out;
    std::size_t t = h_tem.rows();
    for (int i = 0; i < kNumTargets; ++i) {
        Tensor h_i = repeat_rows(select_row(h_var, static_cast<std::size_t>(kTargetVars[i])), t);
        Tensor gate_pre =
            affine(relu(affine(concat_lastdim(h_i, h_tem), p.w1, p.b1)), p.w2, p.b2);
        out[i] = mul(sigmoid(gate_pre), h_tem);
    }
    return out;
}

}  // namespace bidenv
