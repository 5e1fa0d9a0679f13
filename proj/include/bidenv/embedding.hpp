#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bidenv/data.hpp"
#include "bidenv/rng.hpp"
#include "bidenv/tensor.hpp"

namespace bidenv {

// named parameter registry: canonical key -> leaf tensor, in a stable order
using ParamRegistry = std::vector<std::pair<std::string, Tensor>>;

// Fixed sinusoidal position matrix [t x d]:
//   P[i][2k]   = sin(i / (2t)^(2k/d))
//   P[i][2k+1] = cos(i / (2t)^(2k/d))
// Constant, never trained; rows are pairwise distinct for i < t.
Tensor positional_encoding(int t, int d);

// Projections shared by history and today inputs plus the campaign-context
// embedding tables. The per-variable history projection is one shared [T x D]
// map applied to every variable's series; per-variable weights exist behind
// per_variable_hist for experimentation.
struct EmbeddingParams {
    Tensor w_hist;                 // [T x D], shared across variables
    std::vector<Tensor> w_hist_vars;  // per-variable maps when per_variable_hist
    Tensor w_today;                // [C0 x D]
    Tensor w_tick;                 // [1 x D], applied to tick/T
    Tensor adv_table;              // [adv_vocab x D]
    Tensor prod_table;             // [prod_vocab x D]
    std::vector<Tensor> cont_w;    // per continuous feature, [1 x D]
    std::vector<Tensor> cont_b;    // per continuous feature, [1 x D]
    int t = 0, d = 0;
    bool per_variable_hist = false;

    void init(int t_max, int d_model, int adv_vocab, int prod_vocab, int n_cont, Rng& rng,
              bool per_variable = false);
    void register_params(ParamRegistry& reg, const std::string& prefix) const;
};

// sum of category-table rows and per-feature affine maps of the continuous
// features; throws ContractError when an index is outside its table
Tensor embed_campaign(const EmbeddingParams& p, int adv_cat, int prod_cat,
                      const std::vector<double>& cont_feats);

// [C0 x T] normalized history series -> [C0 x D]; campaign vector broadcast
// onto every variable row
Tensor embed_history(const EmbeddingParams& p, const Tensor& hist_series,
                     const Tensor& campaign_vec);

// [T x C0] normalized today tokens -> [T x D]: slot projection + learnable
// tick map + fixed positional rows + broadcast campaign vector
Tensor embed_today(const EmbeddingParams& p, const Tensor& today_tokens,
                   const Tensor& campaign_vec, const Tensor& pos);

}  // namespace bidenv
