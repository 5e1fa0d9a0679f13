#include "bidenv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace bidenv {

const char* policy_name(Policy p) {
    return p == Policy::kRandomWalk ? "random_walk" : "budget_pacing";
}

double seasonal(const ScenarioSpec& spec, int tick) {
    return spec.periodic_amp *
           std::sin(2.0 * std::numbers::pi * tick / spec.t_max + spec.periodic_phase);
}

double true_win_prob(const ScenarioSpec& spec, double bid, int tick) {
    if (bid < 0.0) throw ContractError("true_win_prob: negative bid");
    double z = spec.win_bias + spec.win_slope * std::log1p(bid) + 0.5 * seasonal(spec, tick);
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double true_expected_cost(const ScenarioSpec& spec, double bid, int tick) {
    if (bid < 0.0) throw ContractError("true_expected_cost: negative bid");
    return spec.base_scale * (1.0 + seasonal(spec, tick)) * spec.kappa *
           (1.0 - std::exp(-bid / spec.kappa));
}

ExpectedOutcome true_expected(const ScenarioSpec& spec, double bid, int tick) {
    double p = true_win_prob(spec, bid, tick);
    double ec = true_expected_cost(spec, bid, tick);
    ExpectedOutcome e;
    e.cost = p * ec;
    e.reward = p * ec * spec.roi_mean;
    e.count = p * (1.0 + ec / kPriceUnit);
    return e;
}

BidRecord sample_record(const ScenarioSpec& spec, double bid, int tick, Rng& rng) {
    BidRecord r;
    r.bid = bid;
    r.tick = tick;
    double p = true_win_prob(spec, bid, tick);
    double ec = true_expected_cost(spec, bid, tick);
    if (!rng.bernoulli(p) || ec <= 0.0) return r;  // lost tick: exact zeros
    r.cost = ec * rng.log_normal_mean1(spec.noise_cv);
    r.count = 1 + static_cast<long>(rng.poisson(r.cost / kPriceUnit));
    r.reward = r.cost * spec.roi_mean * rng.log_normal_mean1(spec.noise_cv);
    return r;
}

double pacing_target_bid(const ScenarioSpec& spec, double budget) {
    double per_tick = budget / (0.9 * spec.t_max);
    double saturation = spec.base_scale * spec.kappa;
    // aim expected spend p*E_c at per_tick assuming p ~ 0.5, then invert the
    // saturating cost curve; cap so the inversion stays finite
    double frac = std::clamp(per_tick / (0.5 * saturation), 0.0, 0.95);
    double bid = -spec.kappa * std::log1p(-frac);
    return std::max(bid, 0.05 * spec.kappa);
}

Trajectory generate_campaign_day(const ScenarioSpec& spec, const Campaign& campaign, int day,
                                 Policy policy, Rng& rng) {
    Trajectory traj;
    traj.day = day;
    traj.complete = true;
    double b0 = pacing_target_bid(spec, campaign.budget) * rng.log_normal_mean1(0.15);
    double bid = b0;
    double spent = 0.0;
    for (int tick = 0; tick < spec.t_max; ++tick) {
        if (rng.uniform() < 0.1) continue;  // sparse trajectories: skip ~10% of ticks
        if (policy == Policy::kRandomWalk) {
            bid *= rng.log_normal_mean1(0.1);
        } else {
            ExpectedOutcome per = true_expected(spec, b0, tick);
            double expected_remaining = std::max(per.cost * (spec.t_max - tick), 1e-9);
            double ratio = (campaign.budget - spent) / expected_remaining;
            bid = b0 * std::clamp(ratio, 0.5, 2.0);
        }
        traj.records.push_back(sample_record(spec, bid, tick, rng));
        spent += traj.records.back().cost;
        if (spent >= campaign.budget) break;
    }
    if (traj.records.empty())  // all ticks skipped (vanishingly rare): place one bid
        traj.records.push_back(sample_record(spec, b0, 0, rng));
    return traj;
}

std::vector<ScenarioSpec> default_scenarios(int t_max, std::uint64_t seed) {
    struct Row {
        const char* label;
        double kappa, m, win_rate, slope, amp, phase, roi, cv, frac_lo, frac_hi;
        Policy policy;
    };
    // m = saturation spend per tick (base_scale*kappa); budgets are fractions
    // of a nominal full-day spend so the duration axis tracks how much of the
    // day a campaign survives
    static const Row rows[] = {
        {"budget-small.dur-mid.walk", 12, 16, 0.50, 1.0, 0.25, 0.0, 2.0, 0.35, 0.18, 0.35,
         Policy::kRandomWalk},
        {"budget-mid.dur-mid.walk", 18, 22, 0.52, 0.9, 0.30, 0.8, 2.4, 0.40, 0.40, 0.70,
         Policy::kRandomWalk},
        {"budget-large.dur-mid.walk", 25, 30, 0.48, 1.1, 0.20, 1.6, 1.6, 0.30, 0.80, 1.40,
         Policy::kRandomWalk},
        {"budget-mid.dur-short.pacing", 15, 20, 0.62, 1.2, 0.35, 2.4, 2.8, 0.45, 0.25, 0.45,
         Policy::kBudgetPacing},
        {"budget-mid.dur-long.pacing", 20, 24, 0.38, 0.8, 0.30, 3.2, 2.2, 0.50, 0.55, 0.95,
         Policy::kBudgetPacing},
        {"budget-small.dur-short.walk", 10, 14, 0.58, 1.3, 0.40, 4.0, 3.2, 0.55, 0.12, 0.25,
         Policy::kRandomWalk},
        {"budget-large.dur-long.pacing", 30, 36, 0.42, 0.7, 0.15, 4.8, 1.4, 0.25, 0.90, 1.60,
         Policy::kBudgetPacing},
        {"budget-mid.dur-mid.pacing", 16, 21, 0.55, 1.0, 0.28, 5.6, 2.0, 0.38, 0.45, 0.75,
         Policy::kBudgetPacing},
    };
    std::vector<ScenarioSpec> specs;
    int id = 0;
    for (const Row& r : rows) {
        ScenarioSpec s;
        s.id = id;
        s.label = r.label;
        s.seed = Rng::mix(seed, static_cast<std::uint64_t>(id) + 1);
        s.kappa = r.kappa;
        s.base_scale = r.m / r.kappa;
        s.periodic_amp = r.amp;
        s.periodic_phase = r.phase;
        s.win_slope = r.slope;
        // pin the win rate at the reference bid kappa: logit(w) - slope*log1p(kappa)
        s.win_bias = std::log(r.win_rate / (1.0 - r.win_rate)) - r.slope * std::log1p(r.kappa);
        s.roi_mean = r.roi;
        s.noise_cv = r.cv;
        // nominal full-day spend when bidding kappa all day
        double full_day = 0.9 * t_max * r.win_rate * r.m * (1.0 - std::exp(-1.0));
        s.budget_low = r.frac_lo * full_day;
        s.budget_high = r.frac_hi * full_day;
        s.t_max = t_max;
        s.policy = r.policy;
        specs.push_back(std::move(s));
        ++id;
    }
    return specs;
}

Dataset generate_dataset(const std::vector<ScenarioSpec>& specs, int n_campaigns_each,
                         const std::string& out_path) {
    if (specs.empty() || n_campaigns_each < 1)
        throw ContractError("generate_dataset: need at least one scenario and one campaign");
    for (const auto& s : specs) {
        if (s.t_max != specs[0].t_max || s.adv_cat_vocab != specs[0].adv_cat_vocab ||
            s.prod_cat_vocab != specs[0].prod_cat_vocab)
            throw ContractError("generate_dataset: scenarios disagree on t_max or vocab sizes");
        if (!(s.budget_low > 0.0) || !(s.budget_high >= s.budget_low))
            throw ContractError("generate_dataset: bad budget range in scenario " +
                                std::to_string(s.id));
    }

    Dataset ds;
    ds.header.version = 1;
    ds.header.variables.assign(kVariableNames.begin(), kVariableNames.end());
    ds.header.adv_cat_vocab = specs[0].adv_cat_vocab;
    ds.header.prod_cat_vocab = specs[0].prod_cat_vocab;
    ds.header.context_len = 3;
    ds.header.t_max = specs[0].t_max;

    int total = static_cast<int>(specs.size()) * n_campaigns_each;
    ds.pairs.resize(total);
#pragma omp parallel for schedule(dynamic) if (total > 4)
    for (int idx = 0; idx < total; ++idx) {
        const ScenarioSpec& spec = specs[idx / n_campaigns_each];
        int j = idx % n_campaigns_each;
        CampaignDayPair& p = ds.pairs[idx];
        p.campaign.id = "s" + std::to_string(spec.id) + "_c" + std::to_string(j);
        std::uint64_t camp_seed = Rng::mix(spec.seed, Rng::hash_str(p.campaign.id));
        Rng camp_rng(camp_seed);
        p.campaign.adv_cat = static_cast<int>(camp_rng.uniform_index(spec.adv_cat_vocab));
        p.campaign.prod_cat = static_cast<int>(camp_rng.uniform_index(spec.prod_cat_vocab));
        p.campaign.budget =
            std::exp(camp_rng.uniform(std::log(spec.budget_low), std::log(spec.budget_high)));
        p.campaign.scenario = spec.id;

        Rng day0(Rng::mix(camp_seed, 1));
        p.history = generate_campaign_day(spec, p.campaign, 0, spec.policy, day0);
        Rng day1(Rng::mix(camp_seed, 2));
        p.today = generate_campaign_day(spec, p.campaign, 1, spec.policy, day1);

        double clicks = 0.0, cost = 0.0, reward = 0.0;
        for (const auto& r : p.history.records) {
            clicks += static_cast<double>(r.count);
            cost += r.cost;
            reward += r.reward;
        }
        p.campaign.context = {clicks, cost, reward / std::max(cost, 1e-9)};
    }

    write_dataset(ds, out_path);

    std::ofstream mf(out_path + ".manifest");
    if (!mf) throw DataError("generate_dataset: cannot open " + out_path + ".manifest");
    mf << "scenarios: " << specs.size() << "  campaigns_each: " << n_campaigns_each
       << "  t_max: " << ds.header.t_max << "\n";
    for (const auto& s : specs) {
        mf << "scenario " << s.id << " label=" << s.label << " policy=" << policy_name(s.policy)
           << " seed=" << s.seed << " kappa=" << s.kappa << " base_scale=" << s.base_scale
           << " periodic_amp=" << s.periodic_amp << " periodic_phase=" << s.periodic_phase
           << " win_slope=" << s.win_slope << " win_bias=" << s.win_bias
           << " roi_mean=" << s.roi_mean << " noise_cv=" << s.noise_cv << " budget=["
           << s.budget_low << "," << s.budget_high << "]\n";
    }
    return ds;
}

}  // namespace bidenv
