#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bidenv/errors.hpp"

namespace bidenv {

// Variable ordering shared by dataset files, token matrices and the model's
// variable axis. The first kNumControls are controls, the rest targets.
inline constexpr int kNumVariables = 5;
inline constexpr int kNumControls = 2;
inline constexpr int kNumTargets = 3;
inline constexpr int kVarBid = 0;
inline constexpr int kVarTick = 1;
inline constexpr int kVarCost = 2;
inline constexpr int kVarReward = 3;
inline constexpr int kVarCount = 4;
extern const std::array<const char*, kNumVariables> kVariableNames;
// rows of the variable axis that are prediction targets, in report order
inline constexpr std::array<int, kNumTargets> kTargetVars = {kVarCost, kVarReward, kVarCount};
extern const std::array<const char*, kNumTargets> kTargetNames;

// One auction tick where a bid was placed. A lost auction has exact zeros in
// all three outcomes.
struct BidRecord {
    double bid = 0.0;
    double cost = 0.0;
    double reward = 0.0;
    long count = 0;
    int tick = 0;
};

struct Campaign {
    std::string id;
    int adv_cat = 0;
    int prod_cat = 0;
    double budget = 0.0;
    std::vector<double> context;  // historical clicks, cost, cost-effectiveness
    int scenario = -1;            // generator bookkeeping; not a model input
};

struct Trajectory {
    int day = 0;
    std::vector<BidRecord> records;
    bool complete = true;
};

// (history day, today day) for one campaign
struct CampaignDayPair {
    Campaign campaign;
    Trajectory history;
    Trajectory today;
};

struct DatasetHeader {
    int version = 1;
    std::vector<std::string> variables;
    int adv_cat_vocab = 0;
    int prod_cat_vocab = 0;
    int context_len = 0;
    int t_max = 0;
};

struct Dataset {
    DatasetHeader header;
    std::vector<CampaignDayPair> pairs;
    std::string warning;  // non-fatal loader notes (e.g. empty dataset)
};

Dataset load_dataset(const std::string& path);
void write_dataset(const Dataset& ds, const std::string& path);

// --- preprocessing ---

// Raw today-token matrix: controls at slot s are the bid/tick placed at s;
// target columns are shifted right one slot with an all-zero start token;
// the candidate (next_bid, next_tick) occupies the slot after the prefix.
struct TodayTokens {
    int t = 0;         // padded length
    int occupied = 0;  // prefix_len + 1 leading real rows
    std::vector<double> tokens;  // [t x kNumVariables], raw values, pads exactly 0
    std::vector<double> mask;    // [t], leading `occupied` ones
};

// prefix_len < 0 means "all records of traj". Throws DataError when the
// occupied rows would overflow t_pad.
TodayTokens preprocess_today(const Trajectory& traj, double next_bid, int next_tick, int t_pad,
                             int prefix_len = -1);

// log1p + standardization; z = (log1p(x) - shift) / scale
struct NormChannel {
    double shift = 0.0;
    double scale = 1.0;
};

struct NormStats {
    std::array<NormChannel, kNumVariables> series;  // tick channel unused (tick -> tick/T_max)
    NormChannel budget;
    std::vector<NormChannel> context;
};

double normalize_value(double raw, const NormChannel& ch);
double denormalize_value(double z, const NormChannel& ch);

// per-variable stats over both days of the given pairs (call on the train split)
NormStats compute_norm_stats(const Dataset& ds, const std::vector<int>& pair_indices);

// Normalized, padded model input for one (pair, prefix, candidate-bid) query.
struct PreparedSample {
    int t = 0;
    int occupied = 0;       // prefix_len + 1
    int labeled = 0;        // leading slots with a genuine next-step target
    std::vector<double> hist;        // [kNumVariables x t] normalized history series
    std::vector<double> tokens;      // [t x kNumVariables] normalized today tokens
    std::vector<double> mask;        // [t]
    std::vector<double> target_norm;  // [t x kNumTargets] next-step targets, normalized
    std::vector<double> target_raw;   // [t x kNumTargets] same, raw scale
    std::vector<double> cum_norm;     // [t x kNumTargets] slot-to-end cumulative, normalized
    std::vector<double> cum_raw;      // [t x kNumTargets]
    int adv_cat = 0;
    int prod_cat = 0;
    std::vector<double> cont_feats;  // normalized [budget, context...]
    int scenario = -1;
    int pair_index = -1;
};

// prefix_len < 0: use all of today's records but the last as prefix (the last
// record supplies the final candidate slot). bid_override >= 0 replaces the
// candidate bid. zero_target_inputs blanks the target columns of the token
// matrix (input ablation). next_tick_override >= 0 sets the candidate slot's
// tick (needed when prefix_len equals the record count).
PreparedSample prepare_sample(const CampaignDayPair& pair, const DatasetHeader& hdr,
                              const NormStats& ns, int prefix_len = -1,
                              double bid_override = -1.0, bool zero_target_inputs = false,
                              int next_tick_override = -1);

using PreparedBatch = std::vector<PreparedSample>;

// Campaign-disjoint split of pair indices by integer ratios, deterministic in
// `seed`. Errors when there are fewer campaigns than non-zero ratio parts.
std::array<std::vector<int>, 3> split_dataset(const Dataset& ds, int r_train, int r_val,
                                              int r_test, std::uint64_t seed);

}  // namespace bidenv
