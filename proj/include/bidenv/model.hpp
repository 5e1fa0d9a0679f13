#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bidenv/data.hpp"
#include "bidenv/embedding.hpp"
#include "bidenv/heads.hpp"
#include "bidenv/transformer.hpp"

namespace bidenv {

struct ModelConfig {
    int t_max = 48;
    int d_model = 64;
    int n_layers = 2;  // encoder and decoder depth
    int n_heads = 1;
    int adv_vocab = 8;
    int prod_vocab = 12;
    int context_len = 3;
    double gamma = 1.0;  // weight of the cumulative-prediction loss
    // ablation toggles: skip the variable encoder ("w/o va"), feed zeroed
    // target columns ("w/o ta", applied at sample preparation), use a plain
    // regression head instead of the zero-inflated one ("w/o zip");
    // gamma = 0 disables the cumulative task ("w/o cfp")
    bool use_va = true;
    bool use_zip = true;
    bool zero_target_inputs = false;
    bool nonneg_value_head = false;  // softplus on the conditional value
    bool per_variable_hist = false;  // per-variable history projections

    int n_cont_feats() const { return 1 + context_len; }  // budget + context
};

// per-sample forward outputs: one prediction set per target
struct SampleForward {
    std::array<TargetPrediction, kNumTargets> targets;
};

class Model {
  public:
    void init(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    // canonical name -> leaf tensor, stable order across runs and processes
    const ParamRegistry& params() const { return params_; }

    SampleForward forward(const PreparedSample& s) const;

    // prepare_sample with this model's padded length and input-ablation flag
    PreparedSample prepare(const CampaignDayPair& pair, const NormStats& ns, int prefix_len = -1,
                           double bid_override = -1.0, int next_tick_override = -1) const;

    // mean over the batch of per-sample losses; per-sample loss is the
    // slot-averaged zero-inflated term summed over targets plus gamma times
    // the slot-averaged cumulative term summed over targets
    Tensor batch_loss(const PreparedBatch& batch, LossReport& report) const;

    long param_count() const;

  private:
    ModelConfig cfg_;
    EmbeddingParams emb_;
    std::vector<AttentionBlockParams> enc_, dec_;
    FusionParams fusion_;
    std::array<TargetHeadParams, kNumTargets> heads_;
    Tensor pos_;  // constant positional matrix [T x D]
    ParamRegistry params_;
};

}  // namespace bidenv
