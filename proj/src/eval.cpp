#include "bidenv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace bidenv {

namespace {

// model outputs at one slot, lifted onto both scales
SlotPrediction extract_slot(const SampleForward& fwd, int slot, const NormStats& stats,
                            bool use_zip) {
    SlotPrediction out;
    for (int i = 0; i < kNumTargets; ++i) {
        const auto& t = fwd.targets[i];
        const NormChannel& ch = stats.series[kTargetVars[i]];
        out.p[i] = use_zip ? t.p.at(slot, 0) : 1.0;
        out.y_norm[i] = t.y_hat.at(slot, 0);
        out.y_raw[i] = denormalize_value(t.y_hat.at(slot, 0), ch);
        out.y_tilde_raw[i] = denormalize_value(t.y_tilde.at(slot, 0), ch);
        out.cum_norm[i] = t.y_cum.at(slot, 0);
        out.cum_raw[i] = denormalize_value(t.y_cum.at(slot, 0), ch);
    }
    return out;
}

}  // namespace

SlotPrediction ModelPredictor::predict(const CampaignDayPair& pair, int prefix_len,
                                       double bid_override, int tick_override) {
    NoGradGuard ng;
    PreparedSample s = model_.prepare(pair, stats_, prefix_len, bid_override, tick_override);
    SampleForward fwd = model_.forward(s);
    int slot = s.occupied - 1;  // the candidate slot
    return extract_slot(fwd, slot, stats_, model_.config().use_zip);
}

SlotPrediction OraclePredictor::predict(const CampaignDayPair& pair, int prefix_len,
                                        double bid_override, int tick_override) {
    int scenario = pair.campaign.scenario;
    if (scenario < 0 || scenario >= static_cast<int>(specs_.size()))
        throw ContractError("OraclePredictor: pair has no known scenario");
    const ScenarioSpec& spec = specs_[scenario];
    int m = static_cast<int>(pair.today.records.size());
    if (prefix_len < 0) prefix_len = m - 1;
    double bid = bid_override >= 0.0 ? bid_override
                 : prefix_len < m   ? pair.today.records[prefix_len].bid
                                    : 0.0;
    int tick = tick_override >= 0 ? tick_override
               : prefix_len < m   ? pair.today.records[prefix_len].tick
                                  : spec.t_max - 1;
    SlotPrediction out;
    ExpectedOutcome e = true_expected(spec, bid, tick);
    double p = true_win_prob(spec, bid, tick);
    double raw[kNumTargets] = {e.cost, e.reward, e.count};
    double cum[kNumTargets] = {0.0, 0.0, 0.0};
    for (int t = tick; t < spec.t_max; ++t) {
        ExpectedOutcome et = true_expected(spec, bid, t);
        cum[0] += 0.9 * et.cost;
        cum[1] += 0.9 * et.reward;
        cum[2] += 0.9 * et.count;
    }
    for (int i = 0; i < kNumTargets; ++i) {
        const NormChannel& ch = stats_.series[kTargetVars[i]];
        out.p[i] = p;
        out.y_raw[i] = raw[i];
        out.y_norm[i] = normalize_value(raw[i], ch);
        out.y_tilde_raw[i] = p > 0.0 ? raw[i] / p : 0.0;
        out.cum_raw[i] = cum[i];
        out.cum_norm[i] = normalize_value(cum[i], ch);
    }
    return out;
}

SlotPrediction ConstantPredictor::predict(const CampaignDayPair&, int, double, int) {
    SlotPrediction out;
    for (int i = 0; i < kNumTargets; ++i) {
        const NormChannel& ch = stats_.series[kTargetVars[i]];
        out.p[i] = 1.0;
        out.y_raw[i] = values_[i];
        out.y_norm[i] = normalize_value(values_[i], ch);
        out.y_tilde_raw[i] = values_[i];
        out.cum_raw[i] = values_[i];
        out.cum_norm[i] = normalize_value(values_[i], ch);
    }
    return out;
}

EvalReport evaluate_model(const Model& model, const Dataset& ds, const std::vector<int>& idx,
                          const NormStats& stats, const std::string& split_name) {
    if (idx.empty()) throw ContractError("evaluate_model: empty split");
    // per-pair error sums computed independently, reduced serially in index
    // order, so results do not depend on the thread count
    struct PairErr {
        double abs[kNumTargets] = {0, 0, 0};
        double sq[kNumTargets] = {0, 0, 0};
        long n = 0;
    };
    std::vector<PairErr> errs(idx.size());
#pragma omp parallel for schedule(dynamic) if (idx.size() > 8)
    for (int k = 0; k < static_cast<int>(idx.size()); ++k) {
        NoGradGuard ng;
        const CampaignDayPair& pair = ds.pairs.at(idx[k]);
        PreparedSample s = model.prepare(pair, stats);
        SampleForward fwd = model.forward(s);
        PairErr& e = errs[k];
        for (int slot = 0; slot < s.labeled; ++slot) {
            for (int i = 0; i < kNumTargets; ++i) {
                const NormChannel& ch = stats.series[kTargetVars[i]];
                double pred = denormalize_value(fwd.targets[i].y_hat.at(slot, 0), ch);
                double truth = s.target_raw[slot * kNumTargets + i];
                double d = pred - truth;
                e.abs[i] += std::abs(d);
                e.sq[i] += d * d;
            }
            ++e.n;
        }
    }
    EvalReport rep;
    rep.split_name = split_name;
    rep.samples = static_cast<long>(idx.size());
    double abs_sum[kNumTargets] = {0, 0, 0}, sq_sum[kNumTargets] = {0, 0, 0};
    long n = 0;
    for (const PairErr& e : errs) {
        for (int i = 0; i < kNumTargets; ++i) {
            abs_sum[i] += e.abs[i];
            sq_sum[i] += e.sq[i];
        }
        n += e.n;
    }
    if (n == 0) throw ContractError("evaluate_model: no labeled slots");
    for (int i = 0; i < kNumTargets; ++i) {
        rep.targets[i].mae = abs_sum[i] / n;
        rep.targets[i].rmse = std::sqrt(sq_sum[i] / n);
        rep.targets[i].n = n;
    }
    return rep;
}

EvalReport evaluate_predictor(Predictor& pred, const Dataset& ds, const std::vector<int>& idx,
                              const std::string& split_name) {
    if (idx.empty()) throw ContractError("evaluate_predictor: empty split");
    EvalReport rep;
    rep.split_name = split_name;
    rep.samples = static_cast<long>(idx.size());
    double abs_sum[kNumTargets] = {0, 0, 0}, sq_sum[kNumTargets] = {0, 0, 0};
    long n = 0;
    for (int k : idx) {
        const CampaignDayPair& pair = ds.pairs.at(k);
        int m = static_cast<int>(pair.today.records.size());
        for (int slot = 0; slot < m; ++slot) {
            SlotPrediction sp = pred.predict(pair, slot, -1.0, -1);
            const BidRecord& r = pair.today.records[slot];
            double truth[kNumTargets] = {r.cost, r.reward, static_cast<double>(r.count)};
            for (int i = 0; i < kNumTargets; ++i) {
                double d = sp.y_raw[i] - truth[i];
                abs_sum[i] += std::abs(d);
                sq_sum[i] += d * d;
            }
            ++n;
        }
    }
    if (n == 0) throw ContractError("evaluate_predictor: no labeled slots");
    for (int i = 0; i < kNumTargets; ++i) {
        rep.targets[i].mae = abs_sum[i] / n;
        rep.targets[i].rmse = std::sqrt(sq_sum[i] / n);
        rep.targets[i].n = n;
    }
    return rep;
}

std::array<double, kNumTargets> target_means(const Dataset& ds, const std::vector<int>& idx) {
    std::array<double, kNumTargets> sums{};
    long n = 0;
    for (int k : idx) {
        for (const BidRecord& r : ds.pairs.at(k).today.records) {
            sums[0] += r.cost;
            sums[1] += r.reward;
            sums[2] += static_cast<double>(r.count);
            ++n;
        }
    }
    if (n == 0) throw ContractError("target_means: no records");
    for (double& s : sums) s /= static_cast<double>(n);
    return sums;
}

MonotonicityReport probe_monotonicity(Predictor& pred, const Dataset& ds,
                                      const std::vector<int>& idx, std::vector<double> alphas,
                                      double bucket_divisor, bool strict) {
    if (alphas.empty()) alphas = kDefaultAlphas;
    if (!std::is_sorted(alphas.begin(), alphas.end()))
        throw ContractError("probe_monotonicity: alphas must be ascending");
    if (bucket_divisor <= 0.0) throw ContractError("probe_monotonicity: bad bucket divisor");
    MonotonicityReport rep;
    rep.alphas = alphas;
    const double raw_edges[3] = {100.0, 1000.0, 10000.0};  // 0.1k / 1k / 10k
    double e0 = raw_edges[0] / bucket_divisor, e1 = raw_edges[1] / bucket_divisor,
           e2 = raw_edges[2] / bucket_divisor;
    rep.buckets = {{0.0, e0}, {e0, e1}, {e1, e2}, {e2, std::numeric_limits<double>::infinity()}};
    double tol = strict ? 0.0 : kMonoTol;

    for (int k : idx) {
        const CampaignDayPair& pair = ds.pairs.at(k);
        int m = static_cast<int>(pair.today.records.size());
        if (m < 1) continue;
        const BidRecord& last = pair.today.records[m - 1];
        bool hit = true;
        double prev = -std::numeric_limits<double>::infinity();
        for (double a : alphas) {
            SlotPrediction sp = pred.predict(pair, m - 1, a * last.bid, last.tick);
            double c = sp.y_norm[0];  // cost, normalized scale
            if (c < prev - tol) {
                hit = false;
                break;
            }
            prev = std::max(prev, c);
        }
        std::size_t b = last.cost <= e0 ? 0 : last.cost <= e1 ? 1 : last.cost <= e2 ? 2 : 3;
        (hit ? rep.buckets[b].hits : rep.buckets[b].misses)++;
        (hit ? rep.hits : rep.misses)++;
    }
    rep.ratio = rep.hits + rep.misses ? static_cast<double>(rep.hits) / (rep.hits + rep.misses)
                                      : 0.0;
    return rep;
}

double spearman_rank_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ContractError("spearman: need two same-length series");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<int> order(v.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        std::size_t i = 0;
        while (i < order.size()) {  // average ranks over ties
            std::size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
            double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    std::vector<double> rx = ranks(x), ry = ranks(y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= rx.size();
    my /= ry.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

PredictabilityReport probe_predictability(Predictor& pred, const Dataset& ds,
                                          const std::vector<int>& idx) {
    PredictabilityReport rep;
    for (int d = 1; d <= 9; ++d) rep.deciles.push_back(d);
    for (int i = 0; i < kNumTargets; ++i) {
        rep.mae[i].assign(9, 0.0);
        rep.n[i].assign(9, 0);
    }
    for (int k : idx) {
        const CampaignDayPair& pair = ds.pairs.at(k);
        int m = static_cast<int>(pair.today.records.size());
        if (m < 10) continue;
        ++rep.used_trajectories;
        for (int d = 1; d <= 9; ++d) {
            int prefix = static_cast<int>(std::lround(static_cast<double>(m) * d / 10.0));
            prefix = std::clamp(prefix, 1, m - 1);
            SlotPrediction sp = pred.predict(pair, prefix, -1.0, -1);
            const BidRecord& r = pair.today.records[prefix];
            double truth[kNumTargets] = {r.cost, r.reward, static_cast<double>(r.count)};
            for (int i = 0; i < kNumTargets; ++i) {
                rep.mae[i][d - 1] += std::abs(sp.y_raw[i] - truth[i]);
                rep.n[i][d - 1] += 1;
            }
        }
    }
    std::vector<double> xs(rep.deciles.begin(), rep.deciles.end());
    for (int i = 0; i < kNumTargets; ++i) {
        for (int d = 0; d < 9; ++d)
            if (rep.n[i][d] > 0) rep.mae[i][d] /= static_cast<double>(rep.n[i][d]);
        rep.spearman[i] =
            rep.used_trajectories > 0 ? spearman_rank_correlation(xs, rep.mae[i]) : 0.0;
    }
    return rep;
}

namespace {

// equal-width bins in log1p space over the positive values seen
Histogram make_bins(double max_positive, int n_bins) {
    Histogram h;
    double top = std::log1p(std::max(max_positive, 1e-9));
    for (int i = 0; i <= n_bins; ++i)
        h.edges.push_back(std::expm1(top * i / n_bins));
    h.mass.assign(n_bins, 0.0);
    return h;
}

void deposit(Histogram& h, double value, double mass) {
    if (mass <= 0.0) return;
    if (value <= 0.0) {  // continuous predictions at or below zero: lowest bin
        h.mass.front() += mass;
        return;
    }
    std::size_t bin =
        std::upper_bound(h.edges.begin(), h.edges.end(), value) - h.edges.begin();
    bin = bin == 0 ? 0 : bin - 1;
    if (bin >= h.mass.size()) bin = h.mass.size() - 1;
    h.mass[bin] += mass;
}

void normalize_mass(Histogram& h, double total) {
    if (total <= 0.0) return;
    h.zero_mass /= total;
    for (double& m : h.mass) m /= total;
}

}  // namespace

DistributionExport export_distribution(const Model& model, const Dataset& ds,
                                       const std::vector<int>& idx, const NormStats& stats,
                                       int target, int n_bins) {
    if (target < 0 || target >= kNumTargets)
        throw ContractError("export_distribution: bad target index");
    if (n_bins < 1) throw ContractError("export_distribution: need at least one bin");
    if (idx.empty()) throw ContractError("export_distribution: empty split");
    const NormChannel& ch = stats.series[kTargetVars[target]];
    bool zip = model.config().use_zip;

    // first pass: collect per-slot predictions and ground truth
    struct SlotVal {
        double p, value, truth;
    };
    std::vector<std::vector<SlotVal>> per_pair(idx.size());
#pragma omp parallel for schedule(dynamic) if (idx.size() > 8)
    for (int k = 0; k < static_cast<int>(idx.size()); ++k) {
        NoGradGuard ng;
        const CampaignDayPair& pair = ds.pairs.at(idx[k]);
        PreparedSample s = model.prepare(pair, stats);
        SampleForward fwd = model.forward(s);
        for (int slot = 0; slot < s.labeled; ++slot) {
            SlotVal sv;
            sv.p = zip ? fwd.targets[target].p.at(slot, 0) : 1.0;
            double norm_val = zip ? fwd.targets[target].y_tilde.at(slot, 0)
                                  : fwd.targets[target].y_hat.at(slot, 0);
            sv.value = denormalize_value(norm_val, ch);
            sv.truth = s.target_raw[slot * kNumTargets + target];
            per_pair[k].push_back(sv);
        }
    }

    double max_pos = 0.0;
    long slots = 0;
    for (const auto& v : per_pair)
        for (const SlotVal& sv : v) {
            max_pos = std::max({max_pos, sv.value, sv.truth});
            ++slots;
        }
    DistributionExport out;
    out.slots = slots;
    out.predicted = make_bins(max_pos, n_bins);
    out.actual = make_bins(max_pos, n_bins);
    for (const auto& v : per_pair)
        for (const SlotVal& sv : v) {
            out.predicted.zero_mass += 1.0 - sv.p;  // the mixture's discrete atom
            deposit(out.predicted, sv.value, sv.p);
            if (sv.truth == 0.0)
                out.actual.zero_mass += 1.0;
            else
                deposit(out.actual, sv.truth, 1.0);
        }
    normalize_mass(out.predicted, static_cast<double>(slots));
    normalize_mass(out.actual, static_cast<double>(slots));
    return out;
}

void write_histogram_columns(const DistributionExport& d, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("write_histogram_columns: cannot open " + path);
    f << "# bin_center predicted_mass actual_mass\n";
    f << "0 " << d.predicted.zero_mass << " " << d.actual.zero_mass << "\n";
    for (std::size_t i = 0; i < d.predicted.mass.size(); ++i) {
        double center = 0.5 * (d.predicted.edges[i] + d.predicted.edges[i + 1]);
        f << center << " " << d.predicted.mass[i] << " " << d.actual.mass[i] << "\n";
    }
    if (!f) throw DataError("write_histogram_columns: write failed for " + path);
}

BidSelection select_bid(const Model& model, const CampaignDayPair& pair, int prefix_len,
                        double remaining_budget, const std::vector<double>& bid_grid,
                        const NormStats& stats, bool rollout) {
    if (bid_grid.empty()) throw ContractError("select_bid: empty bid grid");
    if (!std::is_sorted(bid_grid.begin(), bid_grid.end()))
        throw ContractError("select_bid: bid grid must be ascending");
    NoGradGuard ng;
    const NormChannel& cost_ch = stats.series[kVarCost];
    BidSelection sel;
    double best_dist = std::numeric_limits<double>::infinity();
    int m = static_cast<int>(pair.today.records.size());
    if (prefix_len < 0) prefix_len = m;

    for (double bid : bid_grid) {
        double predicted;
        if (!rollout) {
            PreparedSample s = model.prepare(pair, stats, prefix_len, bid);
            SampleForward fwd = model.forward(s);
            predicted = denormalize_value(fwd.targets[0].y_cum.at(s.occupied - 1, 0), cost_ch);
        } else {
            // feed predicted outcomes forward until the day runs out
            CampaignDayPair sim = pair;
            sim.today.records.resize(prefix_len);
            int tick = prefix_len > 0 ? sim.today.records.back().tick + 1 : 0;
            double total = 0.0;
            while (tick < model.config().t_max &&
                   static_cast<int>(sim.today.records.size()) + 1 <= model.config().t_max) {
                PreparedSample s = model.prepare(
                    sim, stats, static_cast<int>(sim.today.records.size()), bid, tick);
                SampleForward fwd = model.forward(s);
                int slot = s.occupied - 1;
                double cost = std::max(
                    0.0, denormalize_value(fwd.targets[0].y_hat.at(slot, 0), cost_ch));
                double reward = std::max(
                    0.0, denormalize_value(fwd.targets[1].y_hat.at(slot, 0),
                                           stats.series[kVarReward]));
                double count = std::max(
                    0.0, denormalize_value(fwd.targets[2].y_hat.at(slot, 0),
                                           stats.series[kVarCount]));
                total += cost;
                BidRecord r;
                r.bid = bid;
                r.tick = tick;
                r.cost = cost;
                r.reward = cost > 0.0 ? reward : 0.0;
                r.count = cost > 0.0 ? std::max(0L, std::lround(count)) : 0;
                sim.today.records.push_back(r);
                ++tick;
            }
            predicted = total;
        }
        sel.grid_predictions.push_back(predicted);
        double dist = std::abs(predicted - remaining_budget);
        if (dist < best_dist) {  // strictly better only: ties keep the smaller bid
            best_dist = dist;
            sel.bid = bid;
            sel.predicted_cum_cost = predicted;
        }
    }
    return sel;
}

}  // namespace bidenv
