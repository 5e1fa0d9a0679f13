#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "bidenv/model.hpp"
#include "bidenv/synth.hpp"

namespace bidenv {

// everything a probe may ask about one candidate slot, on both scales
struct SlotPrediction {
    std::array<double, kNumTargets> p{};           // non-zero probability
    std::array<double, kNumTargets> y_norm{};      // mixture mean, normalized
    std::array<double, kNumTargets> y_raw{};       // mixture mean, raw
    std::array<double, kNumTargets> y_tilde_raw{}; // conditional value, raw
    std::array<double, kNumTargets> cum_norm{};    // slot-to-end cumulative, normalized
    std::array<double, kNumTargets> cum_raw{};
};

// Probes run against this interface so the trained model, the ground-truth
// oracle, and constant baselines are interchangeable. prefix_len selects the
// candidate slot; negative bid/tick overrides mean "use the recorded ones".
class Predictor {
  public:
    virtual ~Predictor() = default;
    virtual SlotPrediction predict(const CampaignDayPair& pair, int prefix_len,
                                   double bid_override, int tick_override) = 0;
};

class ModelPredictor : public Predictor {
  public:
    ModelPredictor(const Model& model, const NormStats& stats) : model_(model), stats_(stats) {}
    SlotPrediction predict(const CampaignDayPair& pair, int prefix_len, double bid_override,
                           int tick_override) override;

  private:
    const Model& model_;
    NormStats stats_;
};

// closed-form environment expectations; cumulative terms sum the per-tick
// expectation over the remaining ticks at the candidate bid (0.9 expected
// tick attendance, budget stop ignored)
class OraclePredictor : public Predictor {
  public:
    OraclePredictor(std::vector<ScenarioSpec> specs, const NormStats& stats)
        : specs_(std::move(specs)), stats_(stats) {}
    SlotPrediction predict(const CampaignDayPair& pair, int prefix_len, double bid_override,
                           int tick_override) override;

  private:
    std::vector<ScenarioSpec> specs_;
    NormStats stats_;
};

// fixed per-target raw values regardless of input (train-mean baseline)
class ConstantPredictor : public Predictor {
  public:
    ConstantPredictor(std::array<double, kNumTargets> values, const NormStats& stats)
        : values_(values), stats_(stats) {}
    SlotPrediction predict(const CampaignDayPair& pair, int prefix_len, double bid_override,
                           int tick_override) override;

  private:
    std::array<double, kNumTargets> values_;
    NormStats stats_;
};

// --- error metrics ---

struct TargetMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    long n = 0;
};

struct EvalReport {
    std::array<TargetMetrics, kNumTargets> targets;
    long samples = 0;
    std::string split_name;
};

// next-slot predictions at every labeled slot, denormalized to the raw scale;
// one forward pass per pair. Throws ContractError on an empty index list.
EvalReport evaluate_model(const Model& model, const Dataset& ds, const std::vector<int>& idx,
                          const NormStats& stats, const std::string& split_name = "");

// same protocol through the Predictor interface (one call per slot; used for
// baselines and the oracle)
EvalReport evaluate_predictor(Predictor& pred, const Dataset& ds, const std::vector<int>& idx,
                              const std::string& split_name = "");

// raw per-target means over all labeled slots (constant-baseline fit)
std::array<double, kNumTargets> target_means(const Dataset& ds, const std::vector<int>& idx);

// --- monotonicity probe ---

inline const std::vector<double> kDefaultAlphas = {0.5, 1.0, 1.5, 2.0};
inline constexpr double kMonoTol = 1e-6;  // on the normalized scale

struct MonotonicityReport {
    std::vector<double> alphas;
    struct Bucket {
        double lo = 0.0, hi = 0.0;  // true tick-cost range (raw scale)
        long hits = 0, misses = 0;
        double ratio() const { return hits + misses ? double(hits) / (hits + misses) : 0.0; }
    };
    std::vector<Bucket> buckets;
    long hits = 0, misses = 0;
    double ratio = 0.0;
};

// Scales the final-slot candidate bid by each alpha and checks the predicted
// cost sequence is non-decreasing (tolerance kMonoTol on the normalized
// scale; strict disables the tolerance). Buckets by the true cost of that
// slot with edges {0.1k, 1k, 10k} / bucket_divisor.
MonotonicityReport probe_monotonicity(Predictor& pred, const Dataset& ds,
                                      const std::vector<int>& idx, std::vector<double> alphas,
                                      double bucket_divisor, bool strict = false);

// --- predictability probe ---

struct PredictabilityReport {
    std::vector<int> deciles;  // 1..9
    // mae[target][decile index]
    std::array<std::vector<double>, kNumTargets> mae;
    std::array<std::vector<long>, kNumTargets> n;
    std::array<double, kNumTargets> spearman{};  // rank corr of (decile, mae)
    long used_trajectories = 0;
};

// evaluates at the nine decile prefixes round(m*d/10) of every trajectory
// with at least 10 records
PredictabilityReport probe_predictability(Predictor& pred, const Dataset& ds,
                                          const std::vector<int>& idx);

double spearman_rank_correlation(const std::vector<double>& x, const std::vector<double>& y);

// --- distribution export ---

struct Histogram {
    double zero_mass = 0.0;      // discrete atom at exactly zero
    std::vector<double> edges;   // n_bins+1 ascending edges over positive values
    std::vector<double> mass;    // n_bins entries; total mass with zero_mass is 1
};

struct DistributionExport {
    Histogram predicted;
    Histogram actual;
    long slots = 0;
};

// Mixture semantics per labeled slot: the zero bin collects 1-p of predicted
// mass, the conditional value lands in its positive bin with mass p. Without
// the zero-inflated head the prediction is a point mass. Ground truth places
// exact zeros in the zero bin.
DistributionExport export_distribution(const Model& model, const Dataset& ds,
                                       const std::vector<int>& idx, const NormStats& stats,
                                       int target, int n_bins);

// two columns (bin center, mass) per histogram, plot-ready
void write_histogram_columns(const DistributionExport& d, const std::string& path);

// --- budget-matching bid selection ---

struct BidSelection {
    double bid = 0.0;
    double predicted_cum_cost = 0.0;
    std::vector<double> grid_predictions;  // per grid bid, raw scale
};

// Picks the grid bid whose predicted cumulative future cost is closest to the
// remaining budget; ties go to the smaller bid. Default mode reads the
// cumulative head once per candidate; rollout mode instead feeds predicted
// outcomes forward tick by tick and sums the predicted per-tick costs.
BidSelection select_bid(const Model& model, const CampaignDayPair& pair, int prefix_len,
                        double remaining_budget, const std::vector<double>& bid_grid,
                        const NormStats& stats, bool rollout = false);

}  // namespace bidenv
