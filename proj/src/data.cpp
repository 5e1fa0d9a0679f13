#include "bidenv/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "bidenv/rng.hpp"
#include "json.hpp"

namespace bidenv {

using nlohmann::json;

const std::array<const char*, kNumVariables> kVariableNames = {"bid", "tick", "cost", "reward",
                                                               "count"};
const std::array<const char*, kNumTargets> kTargetNames = {"cost", "reward", "count"};

TodayTokens preprocess_today(const Trajectory& traj, double next_bid, int next_tick, int t_pad,
                             int prefix_len) {
    int m = static_cast<int>(traj.records.size());
    if (prefix_len < 0) prefix_len = m;
    if (prefix_len > m)
        throw ContractError("preprocess_today: prefix " + std::to_string(prefix_len) +
                            " exceeds record count " + std::to_string(m));
    int occupied = prefix_len + 1;
    if (occupied > t_pad)
        throw DataError("preprocess_today: " + std::to_string(occupied) +
                        " slots do not fit padded length " + std::to_string(t_pad) +
                        "; split the trajectory");
    TodayTokens out;
    out.t = t_pad;
    out.occupied = occupied;
    out.tokens.assign(static_cast<std::size_t>(t_pad) * kNumVariables, 0.0);
    out.mask.assign(t_pad, 0.0);
    for (int s = 0; s < occupied; ++s) {
        double* row = out.tokens.data() + static_cast<std::size_t>(s) * kNumVariables;
        if (s < prefix_len) {
            row[kVarBid] = traj.records[s].bid;
            row[kVarTick] = static_cast<double>(traj.records[s].tick);
        } else {
            row[kVarBid] = next_bid;
            row[kVarTick] = static_cast<double>(next_tick);
        }
        if (s > 0) {  // shift-right with an all-zero start token at slot 0
            const BidRecord& prev = traj.records[s - 1];
            row[kVarCost] = prev.cost;
            row[kVarReward] = prev.reward;
            row[kVarCount] = static_cast<double>(prev.count);
        }
        out.mask[s] = 1.0;
    }
    return out;
}

double normalize_value(double raw, const NormChannel& ch) {
    return (std::log1p(raw) - ch.shift) / ch.scale;
}

double denormalize_value(double z, const NormChannel& ch) {
    double a = z * ch.scale + ch.shift;
    if (a > 700.0) a = 700.0;  // keep expm1 finite; eval guard only
    return std::expm1(a);
}

namespace {

struct Accum {
    double s = 0.0, s2 = 0.0;
    long n = 0;
    void add(double x) {
        double l = std::log1p(x);
        s += l;
        s2 += l * l;
        ++n;
    }
    NormChannel channel() const {
        if (n == 0) return {0.0, 1.0};
        double mean = s / n;
        double var = std::max(0.0, s2 / n - mean * mean);
        double sd = std::sqrt(var);
        return {mean, sd < 1e-12 ? 1.0 : sd};
    }
};

}  // namespace

NormStats compute_norm_stats(const Dataset& ds, const std::vector<int>& pair_indices) {
    if (pair_indices.empty()) throw DataError("compute_norm_stats: no pairs given");
    Accum series[kNumVariables];
    Accum budget;
    std::vector<Accum> context(ds.header.context_len);
    for (int idx : pair_indices) {
        const auto& p = ds.pairs.at(idx);
        for (const Trajectory* day : {&p.history, &p.today}) {
            for (const auto& r : day->records) {
                series[kVarBid].add(r.bid);
                series[kVarCost].add(r.cost);
                series[kVarReward].add(r.reward);
                series[kVarCount].add(static_cast<double>(r.count));
            }
        }
        budget.add(p.campaign.budget);
        for (std::size_t i = 0; i < context.size() && i < p.campaign.context.size(); ++i)
            context[i].add(p.campaign.context[i]);
    }
    NormStats ns;
    for (int v = 0; v < kNumVariables; ++v) ns.series[v] = series[v].channel();
    ns.series[kVarTick] = {0.0, 1.0};  // tick is scaled by T, not standardized
    ns.budget = budget.channel();
    ns.context.resize(context.size());
    for (std::size_t i = 0; i < context.size(); ++i) ns.context[i] = context[i].channel();
    return ns;
}

PreparedSample prepare_sample(const CampaignDayPair& pair, const DatasetHeader& hdr,
                              const NormStats& ns, int prefix_len, double bid_override,
                              bool zero_target_inputs, int next_tick_override) {
    const auto& today = pair.today;
    int m = static_cast<int>(today.records.size());
    if (prefix_len < 0) {
        if (m < 1) throw DataError("prepare_sample: empty today trajectory");
        prefix_len = m - 1;
    }
    if (prefix_len > m)
        throw ContractError("prepare_sample: prefix exceeds record count");
    double next_bid;
    if (bid_override >= 0.0)
        next_bid = bid_override;
    else if (prefix_len < m)
        next_bid = today.records[prefix_len].bid;
    else
        throw ContractError("prepare_sample: candidate bid required past the last record");
    int next_tick;
    if (next_tick_override >= 0)
        next_tick = next_tick_override;
    else if (prefix_len < m)
        next_tick = today.records[prefix_len].tick;
    else
        next_tick = today.records[m - 1].tick + 1;

    int T = hdr.t_max;
    auto raw = preprocess_today(today, next_bid, next_tick, T, prefix_len);

    PreparedSample s;
    s.t = T;
    s.occupied = raw.occupied;
    s.labeled = std::min(raw.occupied, m);
    s.mask = std::move(raw.mask);
    s.tokens.assign(static_cast<std::size_t>(T) * kNumVariables, 0.0);
    double t_div = static_cast<double>(T);
    for (int t = 0; t < s.occupied; ++t) {
        const double* rin = raw.tokens.data() + static_cast<std::size_t>(t) * kNumVariables;
        double* rout = s.tokens.data() + static_cast<std::size_t>(t) * kNumVariables;
        rout[kVarBid] = normalize_value(rin[kVarBid], ns.series[kVarBid]);
        rout[kVarTick] = rin[kVarTick] / t_div;
        if (!zero_target_inputs) {
            rout[kVarCost] = normalize_value(rin[kVarCost], ns.series[kVarCost]);
            rout[kVarReward] = normalize_value(rin[kVarReward], ns.series[kVarReward]);
            rout[kVarCount] = normalize_value(rin[kVarCount], ns.series[kVarCount]);
        }
    }

    // history series, variable-major
    s.hist.assign(static_cast<std::size_t>(kNumVariables) * T, 0.0);
    int mh = static_cast<int>(pair.history.records.size());
    if (mh > T) throw DataError("prepare_sample: history longer than padded length");
    for (int j = 0; j < mh; ++j) {
        const auto& r = pair.history.records[j];
        s.hist[kVarBid * T + j] = normalize_value(r.bid, ns.series[kVarBid]);
        s.hist[kVarTick * T + j] = static_cast<double>(r.tick) / t_div;
        s.hist[kVarCost * T + j] = normalize_value(r.cost, ns.series[kVarCost]);
        s.hist[kVarReward * T + j] = normalize_value(r.reward, ns.series[kVarReward]);
        s.hist[kVarCount * T + j] = normalize_value(static_cast<double>(r.count), ns.series[kVarCount]);
    }

    // next-step targets per slot (slot s predicts record s) and cumulative
    // slot-to-end sums over today's full trajectory
    s.target_norm.assign(static_cast<std::size_t>(T) * kNumTargets, 0.0);
    s.target_raw.assign(static_cast<std::size_t>(T) * kNumTargets, 0.0);
    s.cum_norm.assign(static_cast<std::size_t>(T) * kNumTargets, 0.0);
    s.cum_raw.assign(static_cast<std::size_t>(T) * kNumTargets, 0.0);
    std::array<double, kNumTargets> tail = {0.0, 0.0, 0.0};
    std::vector<std::array<double, kNumTargets>> cum(m);
    for (int j = m - 1; j >= 0; --j) {
        tail[0] += today.records[j].cost;
        tail[1] += today.records[j].reward;
        tail[2] += static_cast<double>(today.records[j].count);
        cum[j] = tail;
    }
    for (int t = 0; t < s.labeled; ++t) {
        const auto& r = today.records[t];
        double vals[kNumTargets] = {r.cost, r.reward, static_cast<double>(r.count)};
        for (int k = 0; k < kNumTargets; ++k) {
            s.target_raw[t * kNumTargets + k] = vals[k];
            s.target_norm[t * kNumTargets + k] = normalize_value(vals[k], ns.series[kTargetVars[k]]);
            s.cum_raw[t * kNumTargets + k] = cum[t][k];
            s.cum_norm[t * kNumTargets + k] = normalize_value(cum[t][k], ns.series[kTargetVars[k]]);
        }
    }

    s.adv_cat = pair.campaign.adv_cat;
    s.prod_cat = pair.campaign.prod_cat;
    s.cont_feats.reserve(1 + pair.campaign.context.size());
    s.cont_feats.push_back(normalize_value(pair.campaign.budget, ns.budget));
    for (std::size_t i = 0; i < pair.campaign.context.size(); ++i) {
        NormChannel ch = i < ns.context.size() ? ns.context[i] : NormChannel{0.0, 1.0};
        s.cont_feats.push_back(normalize_value(pair.campaign.context[i], ch));
    }
    s.scenario = pair.campaign.scenario;
    return s;
}

std::array<std::vector<int>, 3> split_dataset(const Dataset& ds, int r_train, int r_val,
                                              int r_test, std::uint64_t seed) {
    if (r_train < 0 || r_val < 0 || r_test < 0 || r_train + r_val + r_test <= 0)
        throw ContractError("split_dataset: ratios must be non-negative and not all zero");
    // campaigns in first-appearance order
    std::vector<std::string> ids;
    std::map<std::string, std::vector<int>> by_campaign;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
        const std::string& id = ds.pairs[i].campaign.id;
        auto [it, fresh] = by_campaign.try_emplace(id);
        if (fresh) ids.push_back(id);
        it->second.push_back(static_cast<int>(i));
    }
    int ratios[3] = {r_train, r_val, r_test};
    int nonzero = 0;
    for (int r : ratios) nonzero += r > 0 ? 1 : 0;
    if (static_cast<int>(ids.size()) < nonzero)
        throw DataError("split_dataset: " + std::to_string(ids.size()) +
                        " campaigns cannot fill " + std::to_string(nonzero) + " splits");

    Rng rng(Rng::mix(seed, 0x5b117));
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[rng.uniform_index(i)]);

    std::size_t n = ids.size();
    double total = ratios[0] + ratios[1] + ratios[2];
    std::size_t counts[3];
    double frac[3];
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        double exact = n * ratios[k] / total;
        counts[k] = static_cast<std::size_t>(exact);
        frac[k] = exact - counts[k];
        assigned += counts[k];
    }
    while (assigned < n) {  // largest remainder
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (frac[k] > frac[best]) best = k;
        ++counts[best];
        frac[best] = -1;
        ++assigned;
    }
    // every requested split must end non-empty
    for (int k = 0; k < 3; ++k) {
        while (ratios[k] > 0 && counts[k] == 0) {
            int donor = 0;
            for (int j = 1; j < 3; ++j)
                if (counts[j] > counts[donor]) donor = j;
            if (counts[donor] <= 1) throw DataError("split_dataset: not enough campaigns");
            --counts[donor];
            ++counts[k];
        }
    }

    std::array<std::vector<int>, 3> out;
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < counts[k]; ++i, ++pos)
            for (int pair_idx : by_campaign[ids[pos]]) out[k].push_back(pair_idx);
        std::sort(out[k].begin(), out[k].end());
    }
    return out;
}

// --- file io ---

namespace {

json record_to_json(const BidRecord& r) {
    return json::array({r.bid, r.cost, r.reward, r.count, r.tick});
}

void append_errors(std::vector<std::string>& errs, int line, const std::string& msg) {
    if (errs.size() < 20) errs.push_back("line " + std::to_string(line) + ": " + msg);
}

bool read_records(const json& arr, Trajectory& day, int t_max, int line,
                  std::vector<std::string>& errs) {
    if (!arr.is_array() || arr.empty()) {
        append_errors(errs, line, "day must be a non-empty array of records");
        return false;
    }
    int prev_tick = -1;
    for (const auto& e : arr) {
        if (!e.is_array() || e.size() != 5) {
            append_errors(errs, line, "record must be [bid, cost, reward, count, tick]");
            return false;
        }
        BidRecord r;
        r.bid = e[0].get<double>();
        r.cost = e[1].get<double>();
        r.reward = e[2].get<double>();
        double cnt = e[3].get<double>();
        double tk = e[4].get<double>();
        if (!(r.bid >= 0.0) || !(r.cost >= 0.0) || !(r.reward >= 0.0) || cnt < 0 ||
            cnt != std::floor(cnt)) {
            append_errors(errs, line, "negative or non-integral record fields");
            return false;
        }
        if (r.cost == 0.0 && (r.reward != 0.0 || cnt != 0.0)) {
            append_errors(errs, line, "lost tick (cost 0) must have zero reward and count");
            return false;
        }
        if (tk != std::floor(tk) || tk < 0 || tk >= t_max) {
            append_errors(errs, line, "tick out of [0, T_max)");
            return false;
        }
        r.count = static_cast<long>(cnt);
        r.tick = static_cast<int>(tk);
        if (r.tick <= prev_tick) {
            append_errors(errs, line, "ticks must be strictly increasing");
            return false;
        }
        prev_tick = r.tick;
        day.records.push_back(r);
    }
    return true;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("write_dataset: cannot open " + path);
    json hdr = {{"version", ds.header.version},
                {"variables", ds.header.variables},
                {"adv_cat_vocab", ds.header.adv_cat_vocab},
                {"prod_cat_vocab", ds.header.prod_cat_vocab},
                {"context_len", ds.header.context_len},
                {"T_max", ds.header.t_max}};
    f << hdr.dump() << "\n";
    for (const auto& p : ds.pairs) {
        json camp = {{"id", p.campaign.id},
                     {"adv_cat", p.campaign.adv_cat},
                     {"prod_cat", p.campaign.prod_cat},
                     {"budget", p.campaign.budget},
                     {"context", p.campaign.context}};
        if (p.campaign.scenario >= 0) camp["scenario"] = p.campaign.scenario;
        json line = {{"campaign", camp}, {"history", json::array()}, {"today", json::array()}};
        for (const auto& r : p.history.records) line["history"].push_back(record_to_json(r));
        for (const auto& r : p.today.records) line["today"].push_back(record_to_json(r));
        f << line.dump() << "\n";
    }
    if (!f) throw DataError("write_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("load_dataset: cannot open " + path);
    Dataset ds;
    std::string line;
    int line_no = 0;
    std::vector<std::string> errs;

    if (!std::getline(f, line)) throw DataError("load_dataset: " + path + " is empty");
    ++line_no;
    try {
        json hdr = json::parse(line);
        ds.header.version = hdr.at("version").get<int>();
        ds.header.variables = hdr.at("variables").get<std::vector<std::string>>();
        ds.header.adv_cat_vocab = hdr.at("adv_cat_vocab").get<int>();
        ds.header.prod_cat_vocab = hdr.at("prod_cat_vocab").get<int>();
        ds.header.context_len = hdr.at("context_len").get<int>();
        ds.header.t_max = hdr.at("T_max").get<int>();
    } catch (const json::exception& e) {
        throw DataError("load_dataset: line 1: bad or missing header (" + std::string(e.what()) +
                        ")");
    }
    if (ds.header.version != 1)
        throw DataError("load_dataset: unsupported version " + std::to_string(ds.header.version));
    std::vector<std::string> expect(kVariableNames.begin(), kVariableNames.end());
    if (ds.header.variables != expect)
        throw DataError("load_dataset: line 1: unexpected variable list");
    if (ds.header.t_max <= 0 || ds.header.adv_cat_vocab <= 0 || ds.header.prod_cat_vocab <= 0 ||
        ds.header.context_len < 0)
        throw DataError("load_dataset: line 1: non-positive header dimensions");

    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            append_errors(errs, line_no, std::string("parse error: ") + e.what());
            continue;
        }
        CampaignDayPair p;
        try {
            const json& c = j.at("campaign");
            p.campaign.id = c.at("id").get<std::string>();
            p.campaign.adv_cat = c.at("adv_cat").get<int>();
            p.campaign.prod_cat = c.at("prod_cat").get<int>();
            p.campaign.budget = c.at("budget").get<double>();
            p.campaign.context = c.at("context").get<std::vector<double>>();
            if (c.contains("scenario")) p.campaign.scenario = c.at("scenario").get<int>();
        } catch (const json::exception& e) {
            append_errors(errs, line_no, std::string("bad campaign object: ") + e.what());
            continue;
        }
        if (p.campaign.adv_cat < 0 || p.campaign.adv_cat >= ds.header.adv_cat_vocab ||
            p.campaign.prod_cat < 0 || p.campaign.prod_cat >= ds.header.prod_cat_vocab) {
            append_errors(errs, line_no, "category index outside header vocabulary");
            continue;
        }
        if (static_cast<int>(p.campaign.context.size()) != ds.header.context_len) {
            append_errors(errs, line_no, "context length does not match header");
            continue;
        }
        if (!(p.campaign.budget >= 0.0)) {
            append_errors(errs, line_no, "negative budget");
            continue;
        }
        p.history.day = 0;
        p.today.day = 1;
        if (!j.contains("history") || !j.contains("today")) {
            append_errors(errs, line_no, "missing history/today");
            continue;
        }
        if (!read_records(j["history"], p.history, ds.header.t_max, line_no, errs)) continue;
        if (!read_records(j["today"], p.today, ds.header.t_max, line_no, errs)) continue;
        p.history.complete = true;
        p.today.complete = true;
        ds.pairs.push_back(std::move(p));
    }
    if (!errs.empty()) {
        std::string msg = "load_dataset: " + path + " has invalid lines:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw DataError(msg);
    }
    if (ds.pairs.empty()) ds.warning = "dataset has a header but no records";
    return ds;
}

}  // namespace bidenv
