#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bidenv/data.hpp"
#include "bidenv/rng.hpp"

namespace bidenv {

// one impression is worth this many currency units when deriving counts
inline constexpr double kPriceUnit = 10.0;

enum class Policy { kRandomWalk, kBudgetPacing };

const char* policy_name(Policy p);

// Fully specifies one synthetic market. The closed-form laws below are the
// ground truth the model is later probed against:
//   win prob      sigmoid(win_bias + win_slope*log1p(bid) + 0.5*seasonal(tick))
//   tick cost     base_scale*(1+seasonal(tick))*kappa*(1-exp(-bid/kappa))
//   seasonal      periodic_amp*sin(2*pi*tick/T_max + periodic_phase)
// Cost is strictly increasing and concave in bid; win prob strictly
// increasing; lost ticks produce exact zeros.
struct ScenarioSpec {
    int id = 0;
    std::string label;
    std::uint64_t seed = 0;
    double kappa = 15.0;        // cost saturation scale (also the bid scale)
    double base_scale = 1.0;    // cost level multiplier
    double periodic_amp = 0.0;  // in [0,1)
    double periodic_phase = 0.0;
    double win_slope = 1.0;  // > 0
    double win_bias = 0.0;
    double roi_mean = 2.0;   // > 0
    double noise_cv = 0.3;   // >= 0, coefficient of variation of outcome noise
    double budget_low = 100.0;
    double budget_high = 1000.0;
    int t_max = 48;
    int adv_cat_vocab = 8;
    int prod_cat_vocab = 12;
    Policy policy = Policy::kRandomWalk;
};

double seasonal(const ScenarioSpec& spec, int tick);
// in (0,1); throws ContractError on negative bid
double true_win_prob(const ScenarioSpec& spec, double bid, int tick);
double true_expected_cost(const ScenarioSpec& spec, double bid, int tick);

struct ExpectedOutcome {
    double cost = 0.0;
    double reward = 0.0;
    double count = 0.0;
};

// unconditional per-tick expectations (win prob folded in)
ExpectedOutcome true_expected(const ScenarioSpec& spec, double bid, int tick);

// deterministic view over the closed-form environment functions
struct OracleHandle {
    ScenarioSpec spec;
    double win_prob(double bid, int tick) const { return true_win_prob(spec, bid, tick); }
    double expected_cost(double bid, int tick) const {
        return true_expected_cost(spec, bid, tick);
    }
    ExpectedOutcome expected(double bid, int tick) const {
        return true_expected(spec, bid, tick);
    }
};

// Bernoulli win; on a win cost/reward get mean-1 log-normal noise and count is
// 1 + Poisson(cost/kPriceUnit); on a loss all three outcomes are exact zeros.
BidRecord sample_record(const ScenarioSpec& spec, double bid, int tick, Rng& rng);

// heuristic starting bid so a pacer would spread `budget` over ~90% of a day
double pacing_target_bid(const ScenarioSpec& spec, double budget);

// One day of bidding under `policy`: walk multiplies the previous bid by a
// mean-1 log-normal; pacing rescales the base bid by the ratio of remaining
// budget to expected remaining spend, clipped to [0.5, 2]. 10% of ticks are
// randomly skipped; stops once cumulative cost reaches the budget.
Trajectory generate_campaign_day(const ScenarioSpec& spec, const Campaign& campaign, int day,
                                 Policy policy, Rng& rng);

// Eight market presets spanning budget size, effective duration and the two
// bidding-policy flavors. All share t_max and the category vocabularies.
std::vector<ScenarioSpec> default_scenarios(int t_max, std::uint64_t seed);

// Generates n campaigns per scenario, each with a completed history day and a
// today day, writes the dataset to out_path plus a human-readable scenario
// manifest to out_path + ".manifest", and returns the dataset. Identical
// (specs, n) inputs produce a byte-identical file.
Dataset generate_dataset(const std::vector<ScenarioSpec>& specs, int n_campaigns_each,
                         const std::string& out_path);

}  // namespace bidenv
