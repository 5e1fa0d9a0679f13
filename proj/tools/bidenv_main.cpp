// Command-line front end: dataset generation, training, finetuning,
// evaluation, probes, and diagnostics, all driven by one key=value config
// file plus a handful of flags. Every run writes the fully resolved config
// next to its outputs so it can be reproduced from that file alone.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bidenv/config.hpp"
#include "bidenv/eval.hpp"
#include "bidenv/gradcheck.hpp"
#include "bidenv/synth.hpp"
#include "bidenv/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bidenv;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

const std::vector<std::string> kKnownKeys = {
    "data.path", "data.ratio_train", "data.ratio_val", "data.ratio_test", "data.split_seed",
    "generate.t_max", "generate.scenarios", "generate.campaigns_per_scenario", "generate.seed",
    "model.d_model", "model.n_layers", "model.n_heads", "model.gamma", "model.use_va",
    "model.use_zip", "model.zero_target_inputs", "model.nonneg_value_head",
    "model.per_variable_hist",
    "train.lr", "train.batch_size", "train.epochs", "train.grad_clip", "train.seed",
    "train.holdout_scenarios",
    "probe.alphas", "probe.bucket_divisor", "probe.target", "probe.bins",
    "bid_select.pair_index", "bid_select.prefix_len", "bid_select.remaining_budget",
    "bid_select.grid", "bid_select.mode",
    "sweep.d_list", "sweep.seeds",
    "finetune.fraction",
    "run.command", "run.checkpoint", "run.split", "run.out",
};

// flags shared by most subcommands; strings empty / numbers negative = unset
struct CommonArgs {
    std::string config_path;
    std::string out;
    std::string checkpoint;
    std::string split = "val";
    std::string holdout;
    std::string alphas;
    std::string grid;
    std::string mode;
    double fraction = -1.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

Config load_config(const CommonArgs& a, const std::string& command) {
    Config cfg = a.config_path.empty() ? Config() : Config::parse_file(a.config_path);
    cfg.require_known(kKnownKeys);
    // fold flags into the config so the resolved file reproduces the run
    if (a.seed_set) {
        cfg.set("train.seed", std::to_string(a.seed));
        cfg.set("generate.seed", std::to_string(a.seed));
    }
    if (!a.holdout.empty()) cfg.set("train.holdout_scenarios", a.holdout);
    if (!a.alphas.empty()) cfg.set("probe.alphas", a.alphas);
    if (!a.grid.empty()) cfg.set("bid_select.grid", a.grid);
    if (!a.mode.empty()) cfg.set("bid_select.mode", a.mode);
    if (a.fraction >= 0.0) cfg.set("finetune.fraction", std::to_string(a.fraction));
    cfg.set("run.command", command);
    if (!a.checkpoint.empty()) cfg.set("run.checkpoint", a.checkpoint);
    if (!a.split.empty()) cfg.set("run.split", a.split);
    if (!a.out.empty()) cfg.set("run.out", a.out);
    return cfg;
}

std::string ensure_out_dir(const std::string& out) {
    if (out.empty()) throw ContractError("--out is required for this command");
    fs::create_directories(out);
    return out;
}

Dataset load_data(const Config& cfg) {
    std::string path = cfg.get_str("data.path", "");
    if (path.empty()) throw DataError("config: data.path is required");
    Dataset ds = load_dataset(path);
    if (!ds.warning.empty()) std::cerr << "warning: " << ds.warning << "\n";
    return ds;
}

struct Splits {
    std::vector<int> train, val, test, holdout, all;
};

// campaign-disjoint ratio split; pairs from held-out scenarios are pulled out
// of every part and exposed as their own split
Splits make_splits(const Dataset& ds, const Config& cfg) {
    auto parts = split_dataset(ds, cfg.get_int("data.ratio_train", 8),
                               cfg.get_int("data.ratio_val", 2),
                               cfg.get_int("data.ratio_test", 0),
                               cfg.get_u64("data.split_seed", 7));
    std::vector<int> hs = cfg.get_ints("train.holdout_scenarios", {});
    auto held = [&](int k) {
        return std::find(hs.begin(), hs.end(), ds.pairs[k].campaign.scenario) != hs.end();
    };
    Splits sp;
    for (int k : parts[0]) (held(k) ? sp.holdout : sp.train).push_back(k);
    for (int k : parts[1]) (held(k) ? sp.holdout : sp.val).push_back(k);
    for (int k : parts[2]) (held(k) ? sp.holdout : sp.test).push_back(k);
    std::sort(sp.holdout.begin(), sp.holdout.end());
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) sp.all.push_back(static_cast<int>(i));
    return sp;
}

const std::vector<int>& pick_split(const Splits& sp, const std::string& name) {
    if (name == "train") return sp.train;
    if (name == "val") return sp.val;
    if (name == "test") return sp.test;
    if (name == "holdout") return sp.holdout;
    if (name == "all") return sp.all;
    throw ContractError("unknown split '" + name + "' (train|val|test|holdout|all)");
}

ModelConfig model_config(const Config& cfg, const DatasetHeader& hdr) {
    ModelConfig mc;
    mc.t_max = hdr.t_max;
    mc.d_model = cfg.get_int("model.d_model", 64);
    mc.n_layers = cfg.get_int("model.n_layers", 2);
    mc.n_heads = cfg.get_int("model.n_heads", 1);
    mc.gamma = cfg.get_double("model.gamma", 1.0);
    mc.use_va = cfg.get_bool("model.use_va", true);
    mc.use_zip = cfg.get_bool("model.use_zip", true);
    mc.zero_target_inputs = cfg.get_bool("model.zero_target_inputs", false);
    mc.nonneg_value_head = cfg.get_bool("model.nonneg_value_head", false);
    mc.per_variable_hist = cfg.get_bool("model.per_variable_hist", false);
    mc.adv_vocab = static_cast<int>(hdr.adv_cat_vocab);
    mc.prod_vocab = static_cast<int>(hdr.prod_cat_vocab);
    mc.context_len = static_cast<int>(hdr.context_len);
    return mc;
}

TrainConfig train_config(const Config& cfg, const DatasetHeader& hdr) {
    TrainConfig tc;
    tc.model = model_config(cfg, hdr);
    tc.lr = cfg.get_double("train.lr", 1e-4);
    tc.batch_size = cfg.get_int("train.batch_size", 32);
    tc.epochs = cfg.get_int("train.epochs", 10);
    tc.grad_clip = cfg.get_double("train.grad_clip", 1.0);
    tc.seed = cfg.get_u64("train.seed", 1);
    tc.holdout_scenarios = cfg.get_ints("train.holdout_scenarios", {});
    return tc;
}

std::string require_checkpoint(const CommonArgs& a) {
    if (a.checkpoint.empty()) throw ContractError("--checkpoint is required for this command");
    return a.checkpoint;
}

void print_eval(const EvalReport& rep) {
    std::cout << "split=" << rep.split_name << " pairs=" << rep.samples << "\n";
    for (int i = 0; i < kNumTargets; ++i)
        std::cout << "  " << kTargetNames[i] << ": mae=" << rep.targets[i].mae
                  << " rmse=" << rep.targets[i].rmse << " n=" << rep.targets[i].n << "\n";
}

json eval_to_json(const EvalReport& rep) {
    json out = {{"split", rep.split_name}, {"pairs", rep.samples}};
    for (int i = 0; i < kNumTargets; ++i)
        out["targets"][kTargetNames[i]] = {{"mae", rep.targets[i].mae},
                                           {"rmse", rep.targets[i].rmse},
                                           {"n", rep.targets[i].n}};
    return out;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << j.dump(2) << "\n";
}

// --- subcommands ---

int cmd_generate(const CommonArgs& a) {
    Config cfg = load_config(a, "generate");
    int t_max = cfg.get_int("generate.t_max", 48);
    int n_scen = cfg.get_int("generate.scenarios", 8);
    int per_scen = cfg.get_int("generate.campaigns_per_scenario", 12);
    std::uint64_t seed = cfg.get_u64("generate.seed", 1);

    std::vector<ScenarioSpec> specs = default_scenarios(t_max, seed);
    if (n_scen < 1 || n_scen > static_cast<int>(specs.size()))
        throw ContractError("generate.scenarios must be in [1, " +
                            std::to_string(specs.size()) + "]");
    specs.resize(n_scen);

    std::string out = a.out;
    if (out.empty()) throw ContractError("--out is required for this command");
    std::string file;
    if (out.size() > 6 && out.substr(out.size() - 6) == ".jsonl") {
        if (auto parent = fs::path(out).parent_path(); !parent.empty())
            fs::create_directories(parent);
        file = out;
    } else {
        fs::create_directories(out);
        file = (fs::path(out) / "dataset.jsonl").string();
    }

    Dataset ds = generate_dataset(specs, per_scen, file);
    cfg.write(file + ".resolved.cfg");
    std::cout << "wrote " << ds.pairs.size() << " campaign-day pairs (" << n_scen
              << " scenarios x " << per_scen << " campaigns) to " << file << "\n";
    return kExitOk;
}

int cmd_train(const CommonArgs& a) {
    Config cfg = load_config(a, "train");
    std::string out = ensure_out_dir(a.out);
    Dataset ds = load_data(cfg);
    Splits sp = make_splits(ds, cfg);
    TrainConfig tc = train_config(cfg, ds.header);

    TrainResult res = train(tc, ds, sp.train, sp.val, out);
    cfg.write(out + "/resolved.cfg");
    std::cout << "trained " << res.steps << " steps on " << sp.train.size() << " pairs ("
              << sp.val.size() << " validation)\n";
    std::cout << "best val loss " << res.best_val_loss << " at epoch " << res.best_epoch
              << ", final " << res.final_val_loss << "\n";
    std::cout << "checkpoint: " << res.checkpoint_path << "\n";
    std::cout << "metrics:    " << res.metrics_path << "\n";
    return kExitOk;
}

int cmd_finetune(const CommonArgs& a) {
    Config cfg = load_config(a, "finetune");
    std::string out = ensure_out_dir(a.out);
    std::string ckpt = require_checkpoint(a);
    Dataset ds = load_data(cfg);
    Splits sp = make_splits(ds, cfg);
    const std::vector<int>& pool = pick_split(sp, a.split.empty() ? "holdout" : a.split);
    double fraction = cfg.get_double("finetune.fraction", 0.05);

    LoadedCheckpoint base = load_checkpoint(ckpt);
    TrainConfig tc = train_config(cfg, ds.header);
    tc.model = base.model.config();  // architecture comes from the checkpoint

    FinetuneResult ft = finetune(ckpt, tc, ds, pool, fraction, out);
    cfg.write(out + "/resolved.cfg");
    std::cout << "finetuned on " << ft.used_idx.size() << " of " << pool.size() << " pairs ("
              << ft.heldout_idx.size() << " held out) for " << ft.result.steps << " steps\n";
    std::cout << "checkpoint: " << ft.result.checkpoint_path << "\n";
    if (!ft.heldout_idx.empty()) {
        EvalReport rep = evaluate_model(ft.result.model, ds, ft.heldout_idx, ft.result.stats,
                                        "finetune-holdout");
        print_eval(rep);
    }
    return kExitOk;
}

int cmd_eval(const CommonArgs& a) {
    Config cfg = load_config(a, "eval");
    std::string ckpt = require_checkpoint(a);
    Dataset ds = load_data(cfg);
    Splits sp = make_splits(ds, cfg);
    const std::vector<int>& idx = pick_split(sp, a.split);

    LoadedCheckpoint lc = load_checkpoint(ckpt);
    EvalReport rep = evaluate_model(lc.model, ds, idx, lc.stats, a.split);
    print_eval(rep);
    if (!a.out.empty()) {
        std::string out = ensure_out_dir(a.out);
        write_json(eval_to_json(rep), out + "/eval.json");
        cfg.write(out + "/resolved.cfg");
    }
    return kExitOk;
}

int cmd_probe_mono(const CommonArgs& a) {
    Config cfg = load_config(a, "probe-mono");
    std::string ckpt = require_checkpoint(a);
    Dataset ds = load_data(cfg);
    Splits sp = make_splits(ds, cfg);
    const std::vector<int>& idx = pick_split(sp, a.split);

    LoadedCheckpoint lc = load_checkpoint(ckpt);
    ModelPredictor pred(lc.model, lc.stats);
    std::vector<double> alphas = cfg.get_doubles("probe.alphas", kDefaultAlphas);
    double divisor = cfg.get_double("probe.bucket_divisor", 1.0);

    MonotonicityReport rep = probe_monotonicity(pred, ds, idx, alphas, divisor);
    std::cout << "monotonic ratio " << rep.ratio << " (" << rep.hits << "/"
              << (rep.hits + rep.misses) << ")\n";
    json jb = json::array();
    for (const auto& b : rep.buckets) {
        std::cout << "  cost (" << b.lo << ", " << b.hi << "]: ratio " << b.ratio() << " ("
                  << b.hits << "/" << (b.hits + b.misses) << ")\n";
        jb.push_back({{"lo", b.lo}, {"hi", b.hi}, {"hits", b.hits}, {"misses", b.misses}});
    }
    if (!a.out.empty()) {
        std::string out = ensure_out_dir(a.out);
        write_json({{"ratio", rep.ratio},
                    {"hits", rep.hits},
                    {"misses", rep.misses},
                    {"alphas", rep.alphas},
                    {"buckets", jb}},
                   out + "/probe_mono.json");
        cfg.write(out + "/resolved.cfg");
    }
    return kExitOk;
}

int cmd_probe_pred(const CommonArgs& a) {
    Config cfg = load_config(a, "probe-pred");
    std::string ckpt = require_checkpoint(a);
    Dataset ds = load_data(cfg);
    Splits sp = make_splits(ds, cfg);
    const std::vector<int>& idx = pick_split(sp, a.split);

    LoadedCheckpoint lc = load_checkpoint(ckpt);
    ModelPredictor pred(lc.model, lc.stats);
    PredictabilityReport rep = probe_predictability(pred, ds, idx);
    std::cout << "trajectories with >= 10 records: " << rep.used_trajectories << "\n";
    json jt;
    for (int i = 0; i < kNumTargets; ++i) {
        std::cout << "  " << kTargetNames[i] << ": spearman(decile, mae) = " << rep.spearman[i]
                  << "\n";
        jt[kTargetNames[i]] = {{"spearman", rep.spearman[i]}, {"mae_by_decile", rep.mae[i]}};
    }
    if (!a.out.empty()) {
        std::string out = ensure_out_dir(a.out);
        write_json({{"used_trajectories", rep.used_trajectories},
                    {"deciles", rep.deciles},
                    {"targets", jt}},
                   out + "/probe_pred.json");
        cfg.write(out + "/resolved.cfg");
    }
    return kExitOk;
}

int cmd_zero_shot(const CommonArgs& a) {
    Config cfg = load_config(a, "zero-shot");
    std::string ckpt = require_checkpoint(a);
    Dataset ds = load_data(cfg);
    Splits sp = make_splits(ds, cfg);
    if (sp.holdout.empty())
        throw ContractError("zero-shot: no held-out pairs; set --holdout or "
                            "train.holdout_scenarios");

    LoadedCheckpoint lc = load_checkpoint(ckpt);
    EvalReport model_rep = evaluate_model(lc.model, ds, sp.holdout, lc.stats, "holdout");
    ConstantPredictor baseline(target_means(ds, sp.train), lc.stats);
    EvalReport base_rep = evaluate_predictor(baseline, ds, sp.holdout, "holdout");

    json jt;
    std::cout << "held-out pairs: " << sp.holdout.size() << "\n";
    for (int i = 0; i < kNumTargets; ++i) {
        double ratio = base_rep.targets[i].mae > 0.0
                           ? model_rep.targets[i].mae / base_rep.targets[i].mae
                           : 0.0;
        std::cout << "  " << kTargetNames[i] << ": model mae " << model_rep.targets[i].mae
                  << " vs baseline " << base_rep.targets[i].mae << " (ratio " << ratio
                  << ")\n";
        jt[kTargetNames[i]] = {{"model_mae", model_rep.targets[i].mae},
                               {"baseline_mae", base_rep.targets[i].mae},
                               {"ratio", ratio}};
    }
    if (!a.out.empty()) {
        std::string out = ensure_out_dir(a.out);
        write_json({{"holdout_pairs", sp.holdout.size()}, {"targets", jt}},
                   out + "/zero_shot.json");
        cfg.write(out + "/resolved.cfg");
    }
    return kExitOk;
}

int cmd_export_hist(const CommonArgs& a) {
    Config cfg = load_config(a, "export-hist");
    std::string ckpt = require_checkpoint(a);
    std::string out = ensure_out_dir(a.out);
    Dataset ds = load_data(cfg);
    Splits sp = make_splits(ds, cfg);
    const std::vector<int>& idx = pick_split(sp, a.split);

    LoadedCheckpoint lc = load_checkpoint(ckpt);
    int target = cfg.get_int("probe.target", 0);
    int bins = cfg.get_int("probe.bins", 40);
    DistributionExport d = export_distribution(lc.model, ds, idx, lc.stats, target, bins);
    std::string path = out + "/hist_" + kTargetNames[target] + ".txt";
    write_histogram_columns(d, path);
    cfg.write(out + "/resolved.cfg");
    std::cout << "zero-bin mass: predicted " << d.predicted.zero_mass << ", actual "
              << d.actual.zero_mass << " over " << d.slots << " slots\n";
    std::cout << "histogram: " << path << "\n";
    return kExitOk;
}

int cmd_bid_select(const CommonArgs& a) {
    Config cfg = load_config(a, "bid-select");
    std::string ckpt = require_checkpoint(a);
    Dataset ds = load_data(cfg);

    int pair_index = cfg.get_int("bid_select.pair_index", 0);
    if (pair_index < 0 || pair_index >= static_cast<int>(ds.pairs.size()))
        throw ContractError("bid_select.pair_index out of range");
    const CampaignDayPair& pair = ds.pairs[pair_index];
    int prefix = cfg.get_int("bid_select.prefix_len", -1);
    int m = static_cast<int>(pair.today.records.size());
    if (prefix < 0) prefix = m;

    double budget = cfg.get_double("bid_select.remaining_budget", -1.0);
    if (budget < 0.0) {  // default: what is left of the campaign budget
        double spent = 0.0;
        for (int s = 0; s < std::min(prefix, m); ++s) spent += pair.today.records[s].cost;
        budget = std::max(0.0, pair.campaign.budget - spent);
    }
    std::vector<double> grid = cfg.get_doubles("bid_select.grid", {});
    if (grid.empty()) throw ContractError("bid_select.grid (or --grid) is required");
    std::string mode = cfg.get_str("bid_select.mode", "cumhead");
    if (mode != "cumhead" && mode != "rollout")
        throw ContractError("bid_select.mode must be cumhead or rollout");

    LoadedCheckpoint lc = load_checkpoint(ckpt);
    BidSelection sel =
        select_bid(lc.model, pair, prefix, budget, grid, lc.stats, mode == "rollout");

    std::cout << "campaign " << pair.campaign.id << " day " << pair.today.day << ", prefix "
              << prefix << ", remaining budget " << budget << " (" << mode << ")\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
        std::cout << "  bid " << grid[i] << " -> predicted future cost "
                  << sel.grid_predictions[i] << "\n";
    std::cout << "selected bid " << sel.bid << " (predicted " << sel.predicted_cum_cost
              << ")\n";
    if (!a.out.empty()) {
        std::string out = ensure_out_dir(a.out);
        write_json({{"campaign", pair.campaign.id},
                    {"prefix", prefix},
                    {"remaining_budget", budget},
                    {"mode", mode},
                    {"grid", grid},
                    {"grid_predictions", sel.grid_predictions},
                    {"bid", sel.bid},
                    {"predicted_cum_cost", sel.predicted_cum_cost}},
                   out + "/bid_select.json");
        cfg.write(out + "/resolved.cfg");
    }
    return kExitOk;
}

int cmd_scaling_sweep(const CommonArgs& a) {
    Config cfg = load_config(a, "scaling-sweep");
    std::string out = ensure_out_dir(a.out);
    Dataset ds = load_data(cfg);
    Splits sp = make_splits(ds, cfg);
    TrainConfig base = train_config(cfg, ds.header);
    std::vector<int> d_list = cfg.get_ints("sweep.d_list", {16, 64});
    std::vector<std::uint64_t> seeds;
    for (int s : cfg.get_ints("sweep.seeds", {1, 2, 3}))
        seeds.push_back(static_cast<std::uint64_t>(s));

    std::vector<ScalingPoint> pts =
        scaling_sweep(base, ds, sp.train, sp.val, d_list, seeds, out);
    json jp = json::array();
    for (const ScalingPoint& p : pts) {
        std::cout << "D=" << p.d_model << ": mean final val loss " << p.mean_final_val_loss
                  << " over " << p.per_seed.size() << " seeds\n";
        jp.push_back({{"d_model", p.d_model},
                      {"mean_final_val_loss", p.mean_final_val_loss},
                      {"per_seed", p.per_seed}});
    }
    write_json(jp, out + "/scaling.json");
    cfg.write(out + "/resolved.cfg");
    return kExitOk;
}

int cmd_gradcheck(const CommonArgs& a) {
    std::uint64_t seed = a.seed_set ? a.seed : 7;
    // small but full-architecture configuration on freshly generated data
    std::vector<ScenarioSpec> specs = default_scenarios(/*t_max=*/16, seed);
    specs.resize(2);
    std::string tmp = (fs::temp_directory_path() / "bidenv_gradcheck.jsonl").string();
    Dataset ds = generate_dataset(specs, /*n_campaigns_each=*/2, tmp);

    ModelConfig mc;
    mc.t_max = ds.header.t_max;
    mc.d_model = 16;
    mc.n_layers = 2;
    mc.adv_vocab = static_cast<int>(ds.header.adv_cat_vocab);
    mc.prod_vocab = static_cast<int>(ds.header.prod_cat_vocab);
    mc.context_len = static_cast<int>(ds.header.context_len);
    Model model;
    model.init(mc, Rng::mix(seed, 1));

    std::vector<int> idx = {0, 1, 2, 3};
    NormStats ns = compute_norm_stats(ds, idx);
    PreparedBatch batch;
    for (int k : idx) batch.push_back(model.prepare(ds.pairs.at(k), ns));

    LossReport rep;
    Tensor loss = model.batch_loss(batch, rep);
    backward(loss);
    ParamRegistry reg = model.params();
    GradCheckReport report = finite_diff_check(
        reg,
        [&]() {
            NoGradGuard ng;
            LossReport r;
            return model.batch_loss(batch, r).item();
        },
        /*max_entries_per_param=*/3, Rng::mix(seed, 2));

    std::cout << "checked " << report.checked << " entries across " << reg.size()
              << " parameter tensors\n";
    std::cout << "max relative error " << report.max_rel_err << " at " << report.worst
              << " (tolerance " << kGradCheckTol << ")\n";
    if (!report.pass) {
        std::cerr << "gradient check FAILED\n";
        return kExitNumeric;
    }
    std::cout << "gradient check passed\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bidding-environment foundation model: data, training, probes"};
    app.require_subcommand(1);

    CommonArgs a;
    auto add_common = [&](CLI::App* sub, bool with_split) {
        sub->add_option("--config", a.config_path, "key=value config file");
        sub->add_option("--seed", a.seed, "override every seed in the config")
            ->each([&](const std::string&) { a.seed_set = true; });
        sub->add_option("--out", a.out, "output directory (or file for generate)");
        sub->add_option("--checkpoint", a.checkpoint, "checkpoint file to load");
        if (with_split)
            sub->add_option("--split", a.split, "train|val|test|holdout|all (default val)");
        return sub;
    };

    CLI::App* generate = add_common(app.add_subcommand("generate", "write a synthetic dataset"),
                                    false);
    CLI::App* train_cmd = add_common(app.add_subcommand("train", "train from scratch"), false);
    train_cmd->add_option("--holdout", a.holdout, "comma-separated scenario ids to exclude");
    CLI::App* finetune_cmd =
        add_common(app.add_subcommand("finetune", "continue training from a checkpoint"), true);
    finetune_cmd->add_option("--fraction", a.fraction, "fraction of pool campaigns to use");
    finetune_cmd->add_option("--holdout", a.holdout, "comma-separated scenario ids");
    CLI::App* eval_cmd =
        add_common(app.add_subcommand("eval", "next-slot error metrics on a split"), true);
    eval_cmd->add_option("--holdout", a.holdout, "comma-separated scenario ids");
    CLI::App* mono =
        add_common(app.add_subcommand("probe-mono", "bid-scaling monotonicity probe"), true);
    mono->add_option("--alphas", a.alphas, "comma-separated ascending bid multipliers");
    mono->add_option("--holdout", a.holdout, "comma-separated scenario ids");
    CLI::App* predp = add_common(
        app.add_subcommand("probe-pred", "prefix-length predictability probe"), true);
    predp->add_option("--holdout", a.holdout, "comma-separated scenario ids");
    CLI::App* zshot = add_common(
        app.add_subcommand("zero-shot", "held-out scenario vs constant baseline"), false);
    zshot->add_option("--holdout", a.holdout, "comma-separated scenario ids to hold out");
    CLI::App* exph = add_common(
        app.add_subcommand("export-hist", "predicted vs actual value histogram"), true);
    exph->add_option("--holdout", a.holdout, "comma-separated scenario ids");
    CLI::App* bsel = add_common(
        app.add_subcommand("bid-select", "budget-matching bid from a candidate grid"), false);
    bsel->add_option("--grid", a.grid, "comma-separated ascending candidate bids");
    bsel->add_option("--mode", a.mode, "cumhead|rollout");
    CLI::App* sweep = add_common(
        app.add_subcommand("scaling-sweep", "final val loss across model widths"), false);
    sweep->add_option("--holdout", a.holdout, "comma-separated scenario ids");
    CLI::App* gcheck = add_common(
        app.add_subcommand("gradcheck", "finite-difference check of the full model"), false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);  // prints help/usage itself
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (generate->parsed()) return cmd_generate(a);
        if (train_cmd->parsed()) return cmd_train(a);
        if (finetune_cmd->parsed()) return cmd_finetune(a);
        if (eval_cmd->parsed()) return cmd_eval(a);
        if (mono->parsed()) return cmd_probe_mono(a);
        if (predp->parsed()) return cmd_probe_pred(a);
        if (zshot->parsed()) return cmd_zero_shot(a);
        if (exph->parsed()) return cmd_export_hist(a);
        if (bsel->parsed()) return cmd_bid_select(a);
        if (sweep->parsed()) return cmd_scaling_sweep(a);
        if (gcheck->parsed()) return cmd_gradcheck(a);
        std::cerr << "no subcommand\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
