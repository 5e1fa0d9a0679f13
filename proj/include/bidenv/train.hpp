#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bidenv/model.hpp"

namespace bidenv {

struct TrainConfig {
    ModelConfig model;
    double lr = 1e-4;
    int batch_size = 32;
    int epochs = 10;
    double grad_clip = 1.0;  // global-norm ceiling; <= 0 disables clipping
    std::uint64_t seed = 0;
    std::vector<int> holdout_scenarios;  // excluded from training upstream
};

// Adaptive-moment optimizer (beta1 0.9, beta2 0.999, eps 1e-8), dense
// updates, no weight decay. Moments are exposed for checkpointing.
class Adam {
  public:
    Adam(const ParamRegistry& params, double lr);

    void zero_grad();  // allocate-and-zero every parameter gradient
    void step();       // one update from the current gradients

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    long steps() const { return t_; }

    const std::vector<std::vector<double>>& m() const { return m_; }
    const std::vector<std::vector<double>>& v() const { return v_; }
    void set_state(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v,
                   long t);

  private:
    ParamRegistry params_;
    double lr_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// scales all gradients so their joint L2 norm is at most max_norm; returns
// the pre-clip norm
double clip_global_norm(const ParamRegistry& params, double max_norm);

// --- checkpointing ---
// Container file: one JSON manifest line (version, model config, normalization
// stats, counters, parameter key/shape list), then raw little-endian 64-bit
// float buffers per parameter in manifest order, then optimizer first and
// second moments when present. Round-trips bit-exactly.

void save_checkpoint(const std::string& path, const Model& model, const NormStats& stats,
                     const Adam* opt, long step, int epoch, std::uint64_t rng_state);

struct LoadedCheckpoint {
    Model model;
    NormStats stats;
    long step = 0;
    int epoch = 0;
    std::uint64_t rng_state = 0;
    bool has_optimizer = false;
    long adam_steps = 0;
    std::vector<std::vector<double>> adam_m, adam_v;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// --- training loops ---

struct TrainResult {
    Model model;  // best-validation parameters (reloaded from the checkpoint)
    NormStats stats;
    double best_val_loss = 0.0;
    int best_epoch = -1;
    double final_val_loss = 0.0;
    long steps = 0;
    std::string checkpoint_path;
    std::string metrics_path;
};

// Deterministic mini-batch training. Writes out_dir/metrics.jsonl (one JSON
// record per step: step, zip, bce, mse, cum, total, lr; one per epoch and
// target: epoch, split, target, mae, rmse; plus an epoch total line) and
// out_dir/best.ckpt. Non-finite losses abort with a diagnostic naming the
// step and the offending term.
TrainResult train(const TrainConfig& cfg, const Dataset& ds,
                  const std::vector<int>& train_idx, const std::vector<int>& val_idx,
                  const std::string& out_dir);

// Continues optimization from a checkpoint on a campaign-disjoint fraction of
// `pool` (whole campaigns, selected deterministically from cfg.seed). The
// checkpoint's normalization stats are kept. Indices not selected are
// returned for held-out evaluation.
struct FinetuneResult {
    TrainResult result;
    std::vector<int> used_idx;
    std::vector<int> heldout_idx;
};
FinetuneResult finetune(const std::string& checkpoint_path, const TrainConfig& cfg,
                        const Dataset& ds, const std::vector<int>& pool, double fraction,
                        const std::string& out_dir);

// trains one model per (width, seed); reports the per-width mean of the
// final-epoch validation loss
struct ScalingPoint {
    int d_model = 0;
    double mean_final_val_loss = 0.0;
    std::vector<double> per_seed;
};
std::vector<ScalingPoint> scaling_sweep(const TrainConfig& base, const Dataset& ds,
                                        const std::vector<int>& train_idx,
                                        const std::vector<int>& val_idx,
                                        const std::vector<int>& d_list,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::string& out_dir);

}  // namespace bidenv
