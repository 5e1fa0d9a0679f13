#include "bidenv/embedding.hpp"

#include <cmath>

namespace bidenv {

namespace {

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape[0] * shape[1]);
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from(std::move(shape), std::move(v), /*requires_grad=*/true);
}

}  // namespace

Tensor positional_encoding(int t, int d) {
    std::vector<double> v(static_cast<std::size_t>(t) * d, 0.0);
    double base = 2.0 * t;
    for (int i = 0; i < t; ++i) {
        for (int k = 0; 2 * k < d; ++k) {
            double denom = std::pow(base, 2.0 * k / d);
            double angle = i / denom;
            v[i * d + 2 * k] = std::sin(angle);
            if (2 * k + 1 < d) v[i * d + 2 * k + 1] = std::cos(angle);
        }
    }
    return Tensor::from({static_cast<std::size_t>(t), static_cast<std::size_t>(d)}, std::move(v));
}

void EmbeddingParams::init(int t_max, int d_model, int adv_vocab, int prod_vocab, int n_cont,
                           Rng& rng, bool per_variable) {
    t = t_max;
    d = d_model;
    per_variable_hist = per_variable;
    std::size_t tu = static_cast<std::size_t>(t_max), du = static_cast<std::size_t>(d_model);
    w_hist_vars.clear();
    if (per_variable) {
        for (int v = 0; v < kNumVariables; ++v) w_hist_vars.push_back(uniform_init({tu, du}, tu, rng));
        w_hist = w_hist_vars[0];  // unused in this mode but kept defined
    } else {
        w_hist = uniform_init({tu, du}, tu, rng);
    }
    w_today = uniform_init({kNumVariables, du}, kNumVariables, rng);
    w_tick = uniform_init({1, du}, 1, rng);
    adv_table = uniform_init({static_cast<std::size_t>(adv_vocab), du}, du, rng);
    prod_table = uniform_init({static_cast<std::size_t>(prod_vocab), du}, du, rng);
    cont_w.clear();
    cont_b.clear();
    for (int i = 0; i < n_cont; ++i) {
        cont_w.push_back(uniform_init({1, du}, 1, rng));
        cont_b.push_back(Tensor::zeros({1, du}, /*requires_grad=*/true));
    }
}

void EmbeddingParams::register_params(ParamRegistry& reg, const std::string& prefix) const {
    if (per_variable_hist) {
        for (std::size_t v = 0; v < w_hist_vars.size(); ++v)
            reg.emplace_back(prefix + ".w_hist_v" + std::to_string(v), w_hist_vars[v]);
    } else {
        reg.emplace_back(prefix + ".w_hist", w_hist);
    }
    reg.emplace_back(prefix + ".w_today", w_today);
    reg.emplace_back(prefix + ".w_tick", w_tick);
    reg.emplace_back(prefix + ".adv_table", adv_table);
    reg.emplace_back(prefix + ".prod_table", prod_table);
    for (std::size_t i = 0; i < cont_w.size(); ++i) {
        reg.emplace_back(prefix + ".cont_w" + std::to_string(i), cont_w[i]);
        reg.emplace_back(prefix + ".cont_b" + std::to_string(i), cont_b[i]);
    }
}

Tensor embed_campaign(const EmbeddingParams& p, int adv_cat, int prod_cat,
                      const std::vector<double>& cont_feats) {
    if (adv_cat < 0 || adv_cat >= static_cast<int>(p.adv_table.rows()))
        throw ContractError("embed_campaign: advertiser category " + std::to_string(adv_cat) +
                            " outside table of " + std::to_string(p.adv_table.rows()));
    if (prod_cat < 0 || prod_cat >= static_cast<int>(p.prod_table.rows()))
        throw ContractError("embed_campaign: product category " + std::to_string(prod_cat) +
                            " outside table of " + std::to_string(p.prod_table.rows()));
    if (cont_feats.size() != p.cont_w.size())
        throw ShapeError("embed_campaign: " + std::to_string(cont_feats.size()) +
                         " continuous features vs " + std::to_string(p.cont_w.size()) +
                         " projections");
    Tensor out = add(select_row(p.adv_table, static_cast<std::size_t>(adv_cat)),
                     select_row(p.prod_table, static_cast<std::size_t>(prod_cat)));
    for (std::size_t i = 0; i < cont_feats.size(); ++i)
        out = add(out, add(scale(p.cont_w[i], cont_feats[i]), p.cont_b[i]));
    return out;
}

Tensor embed_history(const EmbeddingParams& p, const Tensor& hist_series,
                     const Tensor& campaign_vec) {
    if (hist_series.rows() != kNumVariables || hist_series.cols() != static_cast<std::size_t>(p.t))
        throw ShapeError("embed_history: series is " + shape_str(hist_series.shape()) +
                         ", expected " + std::to_string(kNumVariables) + "x" + std::to_string(p.t));
    Tensor z;
    if (!p.per_variable_hist) {
        z = matmul(hist_series, p.w_hist);
    } else {
        // each variable row through its own [T x D] map, restacked to [C0 x D]
        Tensor flat;
        for (std::size_t v = 0; v < kNumVariables; ++v) {
            Tensor row = matmul(select_row(hist_series, v), p.w_hist_vars[v]);
            flat = v == 0 ? row : concat_lastdim(flat, row);
        }
        z = reshape(flat, {kNumVariables, static_cast<std::size_t>(p.d)});
    }
    return broadcast_add(z, campaign_vec);
}

Tensor embed_today(const EmbeddingParams& p, const Tensor& today_tokens,
                   const Tensor& campaign_vec, const Tensor& pos) {
    if (today_tokens.cols() != kNumVariables)
        throw ShapeError("embed_today: tokens are " + shape_str(today_tokens.shape()) +
                         ", expected T x " + std::to_string(kNumVariables));
    Tensor z = matmul(today_tokens, p.w_today);
    Tensor tick_col = col_slice(today_tokens, kVarTick, kVarTick + 1);  // [T x 1]
    z = add(z, matmul(tick_col, p.w_tick));
    z = add(z, pos);
    return broadcast_add(z, campaign_vec);
}

}  // namespace bidenv
