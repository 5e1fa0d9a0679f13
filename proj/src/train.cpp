#include "bidenv/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "bidenv/eval.hpp"
#include "bidenv/rng.hpp"
#include "json.hpp"

namespace bidenv {

using nlohmann::json;

Adam::Adam(const ParamRegistry& params, double lr) : params_(params), lr_(lr) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& [name, t] : params_) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

void Adam::step() {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        Tensor& t = params_[p].second;
        const std::vector<double>& g = t.grad();
        std::vector<double>& val = t.mutable_values();
        std::vector<double>& m = m_[p];
        std::vector<double>& v = v_[p];
        for (std::size_t i = 0; i < val.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            val[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
}

void Adam::set_state(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v,
                     long t) {
    if (m.size() != params_.size() || v.size() != params_.size())
        throw DataError("Adam::set_state: moment count mismatch");
    for (std::size_t p = 0; p < params_.size(); ++p)
        if (m[p].size() != params_[p].second.numel() || v[p].size() != params_[p].second.numel())
            throw DataError("Adam::set_state: moment shape mismatch at " + params_[p].first);
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
}

double clip_global_norm(const ParamRegistry& params, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, t] : params)
        for (double g : t.grad()) sq += g * g;
    double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        double s = max_norm / norm;
        for (const auto& [name, t] : params)
            for (double& x : t.node()->grad) x *= s;
    }
    return norm;
}

// --- checkpoint io ---

namespace {

constexpr int kCheckpointVersion = 1;

json config_to_json(const ModelConfig& c) {
    return {{"t_max", c.t_max},
            {"d_model", c.d_model},
            {"n_layers", c.n_layers},
            {"n_heads", c.n_heads},
            {"adv_vocab", c.adv_vocab},
            {"prod_vocab", c.prod_vocab},
            {"context_len", c.context_len},
            {"gamma", c.gamma},
            {"use_va", c.use_va},
            {"use_zip", c.use_zip},
            {"zero_target_inputs", c.zero_target_inputs},
            {"nonneg_value_head", c.nonneg_value_head},
            {"per_variable_hist", c.per_variable_hist}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.t_max = j.at("t_max").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.adv_vocab = j.at("adv_vocab").get<int>();
    c.prod_vocab = j.at("prod_vocab").get<int>();
    c.context_len = j.at("context_len").get<int>();
    c.gamma = j.at("gamma").get<double>();
    c.use_va = j.at("use_va").get<bool>();
    c.use_zip = j.at("use_zip").get<bool>();
    c.zero_target_inputs = j.at("zero_target_inputs").get<bool>();
    c.nonneg_value_head = j.at("nonneg_value_head").get<bool>();
    c.per_variable_hist = j.at("per_variable_hist").get<bool>();
    return c;
}

json stats_to_json(const NormStats& s) {
    json series = json::array();
    for (const auto& ch : s.series) series.push_back({ch.shift, ch.scale});
    json context = json::array();
    for (const auto& ch : s.context) context.push_back({ch.shift, ch.scale});
    return {{"series", series}, {"budget", {s.budget.shift, s.budget.scale}},
            {"context", context}};
}

NormStats stats_from_json(const json& j) {
    NormStats s;
    const json& series = j.at("series");
    if (series.size() != kNumVariables) throw DataError("checkpoint: bad stats series length");
    for (int i = 0; i < kNumVariables; ++i)
        s.series[i] = {series[i][0].get<double>(), series[i][1].get<double>()};
    s.budget = {j.at("budget")[0].get<double>(), j.at("budget")[1].get<double>()};
    for (const auto& e : j.at("context"))
        s.context.push_back({e[0].get<double>(), e[1].get<double>()});
    return s;
}

void write_buffer(std::ofstream& f, const std::vector<double>& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_buffer(std::ifstream& f, std::vector<double>& v) {
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!f) throw DataError("checkpoint: truncated parameter buffer");
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const NormStats& stats,
                     const Adam* opt, long step, int epoch, std::uint64_t rng_state) {
    json params = json::array();
    for (const auto& [name, t] : model.params())
        params.push_back({{"key", name}, {"rows", t.rows()}, {"cols", t.cols()}});
    json manifest = {{"version", kCheckpointVersion},
                     {"format", "f64le"},
                     {"config", config_to_json(model.config())},
                     {"stats", stats_to_json(stats)},
                     {"step", step},
                     {"epoch", epoch},
                     {"rng_state", rng_state},
                     {"params", params},
                     {"has_optimizer", opt != nullptr},
                     {"adam_steps", opt ? opt->steps() : 0}};
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("save_checkpoint: cannot open " + path);
    f << manifest.dump() << "\n";
    for (const auto& [name, t] : model.params()) write_buffer(f, t.values());
    if (opt) {
        for (const auto& m : opt->m()) write_buffer(f, m);
        for (const auto& v : opt->v()) write_buffer(f, v);
    }
    if (!f) throw DataError("save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw DataError("load_checkpoint: missing manifest");
    json manifest;
    try {
        manifest = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError("load_checkpoint: bad manifest: " + std::string(e.what()));
    }
    if (manifest.at("version").get<int>() != kCheckpointVersion)
        throw DataError("load_checkpoint: unsupported version");

    LoadedCheckpoint out;
    ModelConfig cfg = config_from_json(manifest.at("config"));
    out.model.init(cfg, /*seed=*/0);
    out.stats = stats_from_json(manifest.at("stats"));
    out.step = manifest.at("step").get<long>();
    out.epoch = manifest.at("epoch").get<int>();
    out.rng_state = manifest.at("rng_state").get<std::uint64_t>();
    out.has_optimizer = manifest.at("has_optimizer").get<bool>();
    out.adam_steps = manifest.at("adam_steps").get<long>();

    const json& params = manifest.at("params");
    if (params.size() != out.model.params().size())
        throw DataError("load_checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, t] = out.model.params()[i];
        if (params[i].at("key").get<std::string>() != name ||
            params[i].at("rows").get<std::size_t>() != t.rows() ||
            params[i].at("cols").get<std::size_t>() != t.cols())
            throw DataError("load_checkpoint: parameter mismatch at " + name);
    }
    for (const auto& [name, t] : out.model.params()) read_buffer(f, t.node()->value);
    if (out.has_optimizer) {
        for (const auto& [name, t] : out.model.params()) {
            out.adam_m.emplace_back(t.numel());
            read_buffer(f, out.adam_m.back());
        }
        for (const auto& [name, t] : out.model.params()) {
            out.adam_v.emplace_back(t.numel());
            read_buffer(f, out.adam_v.back());
        }
    }
    return out;
}

// --- training ---

namespace {

double validation_loss(const Model& model, const PreparedBatch& val) {
    NoGradGuard ng;
    LossReport rep;
    model.batch_loss(val, rep);
    return rep.total;
}

PreparedBatch prepare_all(const Model& model, const Dataset& ds, const std::vector<int>& idx,
                          const NormStats& ns) {
    PreparedBatch out;
    out.reserve(idx.size());
    for (int k : idx) {
        out.push_back(model.prepare(ds.pairs.at(k), ns));
        out.back().pair_index = k;
    }
    return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& ds, const std::vector<int>& train_idx,
                  const std::vector<int>& val_idx, const std::string& out_dir) {
    if (cfg.lr <= 0.0 || cfg.batch_size < 1 || cfg.epochs < 0)
        throw ContractError("train: bad optimizer settings");
    if (train_idx.empty()) throw ContractError("train: empty training split");
    std::filesystem::create_directories(out_dir);

    TrainResult res;
    res.checkpoint_path = out_dir + "/best.ckpt";
    res.metrics_path = out_dir + "/metrics.jsonl";
    std::ofstream metrics(res.metrics_path);
    if (!metrics) throw DataError("train: cannot open " + res.metrics_path);

    res.stats = compute_norm_stats(ds, train_idx);
    Model model;
    model.init(cfg.model, Rng::mix(cfg.seed, 1));
    Adam opt(model.params(), cfg.lr);

    PreparedBatch train_set = prepare_all(model, ds, train_idx, res.stats);
    PreparedBatch val_set;
    if (!val_idx.empty()) val_set = prepare_all(model, ds, val_idx, res.stats);

    Rng shuffle_rng(Rng::mix(cfg.seed, 0x5u));
    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    long step = 0;
    double best = std::numeric_limits<double>::infinity();
    save_checkpoint(res.checkpoint_path, model, res.stats, &opt, 0, 0, shuffle_rng.state());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            PreparedBatch batch;
            for (std::size_t j = pos; j < std::min(pos + cfg.batch_size, order.size()); ++j)
                batch.push_back(train_set[order[j]]);
            opt.zero_grad();
            LossReport rep;
            Tensor loss = model.batch_loss(batch, rep);
            if (!std::isfinite(rep.total)) {
                std::ostringstream ss;
                ss << "train: non-finite loss at step " << step << " (bce=" << rep.bce
                   << " mse=" << rep.mse << " cum=" << rep.cum << ")";
                throw NumericError(ss.str());
            }
            try {
                backward(loss);
            } catch (const NumericError& e) {
                throw NumericError("train: step " + std::to_string(step) + ": " + e.what());
            }
            clip_global_norm(model.params(), cfg.grad_clip);
            opt.step();
            ++step;
            json line = {{"step", step},          {"zip", rep.zip}, {"bce", rep.bce},
                         {"mse", rep.mse},        {"cum", rep.cum}, {"total", rep.total},
                         {"lr", opt.lr()}};
            metrics << line.dump() << "\n";
        }

        if (!val_set.empty()) {
            double vloss = validation_loss(model, val_set);
            EvalReport er = evaluate_model(model, ds, val_idx, res.stats, "val");
            for (int i = 0; i < kNumTargets; ++i) {
                json line = {{"epoch", epoch + 1},           {"split", "val"},
                             {"target", kTargetNames[i]},    {"mae", er.targets[i].mae},
                             {"rmse", er.targets[i].rmse}};
                metrics << line.dump() << "\n";
            }
            json total_line = {{"epoch", epoch + 1}, {"split", "val"}, {"total", vloss}};
            metrics << total_line.dump() << "\n";
            res.final_val_loss = vloss;
            if (vloss < best) {
                best = vloss;
                res.best_epoch = epoch + 1;
                save_checkpoint(res.checkpoint_path, model, res.stats, &opt, step, epoch + 1,
                                shuffle_rng.state());
            }
        } else {
            // no validation split: keep the latest parameters
            save_checkpoint(res.checkpoint_path, model, res.stats, &opt, step, epoch + 1,
                            shuffle_rng.state());
        }
    }
    metrics.close();

    res.best_val_loss = best;
    res.steps = step;
    res.model = load_checkpoint(res.checkpoint_path).model;
    return res;
}

FinetuneResult finetune(const std::string& checkpoint_path, const TrainConfig& cfg,
                        const Dataset& ds, const std::vector<int>& pool, double fraction,
                        const std::string& out_dir) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw ContractError("finetune: fraction must be in (0, 1]");
    if (pool.empty()) throw ContractError("finetune: empty pool");
    std::filesystem::create_directories(out_dir);

    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);

    // campaign-disjoint subsample: whole campaigns, by first appearance
    std::vector<std::string> ids;
    std::map<std::string, std::vector<int>> by_campaign;
    for (int k : pool) {
        const std::string& id = ds.pairs.at(k).campaign.id;
        auto [it, fresh] = by_campaign.try_emplace(id);
        if (fresh) ids.push_back(id);
        it->second.push_back(k);
    }
    Rng rng(Rng::mix(cfg.seed, 0xf17e));
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[rng.uniform_index(i)]);
    std::size_t take = static_cast<std::size_t>(std::ceil(fraction * ids.size()));
    take = std::min(std::max<std::size_t>(take, 1), ids.size());

    FinetuneResult out;
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (int k : by_campaign[ids[i]])
            (i < take ? out.used_idx : out.heldout_idx).push_back(k);
    std::sort(out.used_idx.begin(), out.used_idx.end());
    std::sort(out.heldout_idx.begin(), out.heldout_idx.end());

    // continue optimization from the loaded parameters; keep the loaded
    // normalization stats so inputs mean the same thing they did in training
    TrainResult& res = out.result;
    res.checkpoint_path = out_dir + "/best.ckpt";
    res.metrics_path = out_dir + "/metrics.jsonl";
    std::ofstream metrics(res.metrics_path);
    if (!metrics) throw DataError("finetune: cannot open " + res.metrics_path);
    res.stats = ckpt.stats;

    Model& model = ckpt.model;
    Adam opt(model.params(), cfg.lr);
    PreparedBatch train_set = prepare_all(model, ds, out.used_idx, res.stats);

    Rng shuffle_rng(Rng::mix(cfg.seed, 0x6u));
    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            PreparedBatch batch;
            for (std::size_t j = pos; j < std::min(pos + cfg.batch_size, order.size()); ++j)
                batch.push_back(train_set[order[j]]);
            opt.zero_grad();
            LossReport rep;
            Tensor loss = model.batch_loss(batch, rep);
            if (!std::isfinite(rep.total))
                throw NumericError("finetune: non-finite loss at step " + std::to_string(step));
            backward(loss);
            clip_global_norm(model.params(), cfg.grad_clip);
            opt.step();
            ++step;
            json line = {{"step", step},   {"zip", rep.zip}, {"bce", rep.bce},
                         {"mse", rep.mse}, {"cum", rep.cum}, {"total", rep.total},
                         {"lr", opt.lr()}};
            metrics << line.dump() << "\n";
        }
    }
    res.steps = step;
    save_checkpoint(res.checkpoint_path, model, res.stats, &opt, step, cfg.epochs,
                    shuffle_rng.state());
    res.model = load_checkpoint(res.checkpoint_path).model;
    return out;
}

std::vector<ScalingPoint> scaling_sweep(const TrainConfig& base, const Dataset& ds,
                                        const std::vector<int>& train_idx,
                                        const std::vector<int>& val_idx,
                                        const std::vector<int>& d_list,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::string& out_dir) {
    if (d_list.empty() || seeds.empty())
        throw ContractError("scaling_sweep: need at least one width and one seed");
    if (val_idx.empty()) throw ContractError("scaling_sweep: needs a validation split");
    std::vector<ScalingPoint> points;
    for (int d : d_list) {
        ScalingPoint pt;
        pt.d_model = d;
        for (std::uint64_t seed : seeds) {
            TrainConfig cfg = base;
            cfg.model.d_model = d;
            cfg.seed = seed;
            std::string dir =
                out_dir + "/d" + std::to_string(d) + "_s" + std::to_string(seed);
            TrainResult r = train(cfg, ds, train_idx, val_idx, dir);
            pt.per_seed.push_back(r.final_val_loss);
            pt.mean_final_val_loss += r.final_val_loss;
        }
        pt.mean_final_val_loss /= static_cast<double>(pt.per_seed.size());
        points.push_back(std::move(pt));
    }
    return points;
}

}  // namespace bidenv
