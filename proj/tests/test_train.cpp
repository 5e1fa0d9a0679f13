#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "bidenv/eval.hpp"
#include "bidenv/synth.hpp"
#include "bidenv/train.hpp"
#include "doctest.h"

using namespace bidenv;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TrainFixture {
    Dataset ds;
    std::vector<int> train_idx, val_idx;
    TrainConfig cfg;
    fs::path dir;

    TrainFixture() {
        auto specs = default_scenarios(/*t_max=*/16, /*seed=*/99);
        specs.resize(2);
        ds = generate_dataset(specs, /*n_campaigns_each=*/3, "/tmp/bidenv_train_fixture.jsonl");
        for (int i = 0; i < static_cast<int>(ds.pairs.size()); ++i)
            (i % 3 == 2 ? val_idx : train_idx).push_back(i);

        cfg.model.t_max = ds.header.t_max;
        cfg.model.d_model = 8;
        cfg.model.n_layers = 1;
        cfg.model.adv_vocab = static_cast<int>(ds.header.adv_cat_vocab);
        cfg.model.prod_vocab = static_cast<int>(ds.header.prod_cat_vocab);
        cfg.model.context_len = static_cast<int>(ds.header.context_len);
        cfg.lr = 3e-3;
        cfg.batch_size = 4;
        cfg.epochs = 2;
        cfg.seed = 11;

        dir = fs::temp_directory_path() / "bidenv_train_tests";
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
};

}  // namespace

TEST_CASE("adam performs the textbook first update") {
    Tensor w = Tensor::from({1, 2}, {1.0, 2.0}, /*requires_grad=*/true);
    ParamRegistry reg = {{"w", w}};
    Adam opt(reg, /*lr=*/0.01);
    opt.zero_grad();
    w.node()->grad = {0.5, -0.25};
    opt.step();
    // bias-corrected first step reduces to lr * g / (|g| + eps)
    CHECK(w.at(0, 0) == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
    CHECK(w.at(0, 1) == doctest::Approx(2.0 + 0.01 * 0.25 / (0.25 + 1e-8)).epsilon(1e-12));
    CHECK(opt.steps() == 1);
}

TEST_CASE("adam leaves parameters untouched when gradients are zero") {
    Tensor w = Tensor::from({2, 2}, {1.0, -2.0, 3.0, -4.0}, true);
    ParamRegistry reg = {{"w", w}};
    Adam opt(reg, 0.1);
    opt.zero_grad();
    opt.step();
    CHECK(w.values() == std::vector<double>{1.0, -2.0, 3.0, -4.0});
}

TEST_CASE("global norm clipping rescales jointly") {
    Tensor a = Tensor::from({1, 1}, {0.0}, true);
    Tensor b = Tensor::from({1, 1}, {0.0}, true);
    ParamRegistry reg = {{"a", a}, {"b", b}};
    a.zero_grad();
    b.zero_grad();
    a.node()->grad = {3.0};
    b.node()->grad = {4.0};

    SUBCASE("above the ceiling") {
        CHECK(clip_global_norm(reg, 2.5) == doctest::Approx(5.0));
        CHECK(a.grad()[0] == doctest::Approx(1.5));
        CHECK(b.grad()[0] == doctest::Approx(2.0));
    }
    SUBCASE("below the ceiling: untouched") {
        CHECK(clip_global_norm(reg, 10.0) == doctest::Approx(5.0));
        CHECK(a.grad()[0] == 3.0);
        CHECK(b.grad()[0] == 4.0);
    }
    SUBCASE("non-positive ceiling disables clipping") {
        CHECK(clip_global_norm(reg, 0.0) == doctest::Approx(5.0));
        CHECK(a.grad()[0] == 3.0);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    TrainFixture fx;
    NormStats ns = compute_norm_stats(fx.ds, fx.train_idx);
    Model model;
    model.init(fx.cfg.model, 123);
    Adam opt(model.params(), 0.01);

    // take one real step so moments and counters are non-trivial
    PreparedSample s = model.prepare(fx.ds.pairs.at(0), ns);
    opt.zero_grad();
    LossReport rep;
    Tensor loss = model.batch_loss({s}, rep);
    backward(loss);
    opt.step();

    std::string path = (fx.dir / "round_trip.ckpt").string();
    save_checkpoint(path, model, ns, &opt, /*step=*/1, /*epoch=*/0, /*rng_state=*/777);
    LoadedCheckpoint loaded = load_checkpoint(path);

    CHECK(loaded.step == 1);
    CHECK(loaded.epoch == 0);
    CHECK(loaded.rng_state == 777);
    CHECK(loaded.has_optimizer);
    CHECK(loaded.adam_steps == 1);
    CHECK(loaded.model.config().d_model == fx.cfg.model.d_model);
    CHECK(loaded.stats.series[kVarCost].shift == ns.series[kVarCost].shift);
    CHECK(loaded.stats.budget.scale == ns.budget.scale);

    REQUIRE(loaded.model.params().size() == model.params().size());
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        const auto& [name, orig] = model.params()[i];
        const auto& [lname, copy] = loaded.model.params()[i];
        CHECK(name == lname);
        CHECK(orig.values() == copy.values());  // bitwise
    }
    CHECK(loaded.adam_m == opt.m());
    CHECK(loaded.adam_v == opt.v());

    // forwards agree bit for bit
    NoGradGuard ng;
    SampleForward f1 = model.forward(s);
    SampleForward f2 = loaded.model.forward(s);
    for (int i = 0; i < kNumTargets; ++i) {
        CHECK(f1.targets[i].y_hat.values() == f2.targets[i].y_hat.values());
        CHECK(f1.targets[i].p.values() == f2.targets[i].p.values());
        CHECK(f1.targets[i].y_cum.values() == f2.targets[i].y_cum.values());
    }

    SUBCASE("a second save of the load is byte-identical") {
        std::string again = (fx.dir / "again.ckpt").string();
        Adam opt2(loaded.model.params(), 0.01);
        opt2.set_state(loaded.adam_m, loaded.adam_v, loaded.adam_steps);
        save_checkpoint(again, loaded.model, loaded.stats, &opt2, loaded.step, loaded.epoch,
                        loaded.rng_state);
        CHECK(slurp(again) == slurp(path));
    }
}

TEST_CASE("checkpoint loader rejects damaged files") {
    TrainFixture fx;
    NormStats ns = compute_norm_stats(fx.ds, fx.train_idx);
    Model model;
    model.init(fx.cfg.model, 5);
    std::string path = (fx.dir / "damaged.ckpt").string();
    save_checkpoint(path, model, ns, nullptr, 0, 0, 0);

    SUBCASE("truncated parameter buffer") {
        std::string bytes = slurp(path);
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    SUBCASE("garbage manifest") {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f << "not json\n";
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint((fx.dir / "nope.ckpt").string()), DataError);
    }
}

TEST_CASE("training runs are deterministic byte for byte") {
    TrainFixture fx;
    std::string d1 = (fx.dir / "runA").string(), d2 = (fx.dir / "runB").string();
    TrainResult r1 = train(fx.cfg, fx.ds, fx.train_idx, fx.val_idx, d1);
    TrainResult r2 = train(fx.cfg, fx.ds, fx.train_idx, fx.val_idx, d2);

    CHECK(slurp(r1.metrics_path) == slurp(r2.metrics_path));
    CHECK(slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path));
    CHECK(r1.best_val_loss == r2.best_val_loss);
    CHECK(r1.best_epoch == r2.best_epoch);
    CHECK(r1.steps == r2.steps);

    SUBCASE("a different seed changes the trajectory") {
        TrainConfig other = fx.cfg;
        other.seed = 12;
        TrainResult r3 = train(other, fx.ds, fx.train_idx, fx.val_idx,
                               (fx.dir / "runC").string());
        CHECK(r3.best_val_loss != r1.best_val_loss);
    }
}

TEST_CASE("a short run beats the untrained starting point") {
    TrainFixture fx;
    TrainConfig cfg = fx.cfg;
    cfg.epochs = 4;
    TrainResult res = train(cfg, fx.ds, fx.train_idx, fx.val_idx, (fx.dir / "descend").string());

    // the run starts from exactly this model (same seed derivation)
    Model fresh;
    fresh.init(cfg.model, Rng::mix(cfg.seed, 1));
    PreparedBatch val;
    for (int k : fx.val_idx) val.push_back(fresh.prepare(fx.ds.pairs.at(k), res.stats));
    NoGradGuard ng;
    LossReport rep;
    fresh.batch_loss(val, rep);
    double untrained = rep.total;

    CHECK(res.best_val_loss < untrained);
    CHECK(res.best_epoch >= 1);
    CHECK(res.steps == 4 * ((static_cast<long>(fx.train_idx.size()) + 3) / 4));

    // the returned model is the best checkpoint, not the last iterate
    LossReport best_rep;
    res.model.batch_loss(val, best_rep);
    CHECK(best_rep.total == doctest::Approx(res.best_val_loss).epsilon(1e-12));

    // metrics stream: per-step lines carry the loss terms, epochs add val rows
    std::ifstream mf(res.metrics_path);
    int step_lines = 0, val_target_lines = 0, val_total_lines = 0;
    std::string line;
    while (std::getline(mf, line)) {
        if (line.find("\"step\"") != std::string::npos) ++step_lines;
        if (line.find("\"mae\"") != std::string::npos) ++val_target_lines;
        if (line.find("\"total\"") != std::string::npos &&
            line.find("\"epoch\"") != std::string::npos)
            ++val_total_lines;
    }
    CHECK(step_lines == res.steps);
    CHECK(val_target_lines == 4 * kNumTargets);
    CHECK(val_total_lines == 4);
}

TEST_CASE("zero epochs writes the initial state and no metrics") {
    TrainFixture fx;
    TrainConfig cfg = fx.cfg;
    cfg.epochs = 0;
    TrainResult res = train(cfg, fx.ds, fx.train_idx, fx.val_idx, (fx.dir / "zero").string());
    CHECK(res.steps == 0);
    CHECK(res.best_epoch == -1);
    CHECK(fs::file_size(res.metrics_path) == 0);

    LoadedCheckpoint ckpt = load_checkpoint(res.checkpoint_path);
    CHECK(ckpt.step == 0);
    Model fresh;
    fresh.init(cfg.model, Rng::mix(cfg.seed, 1));
    CHECK(ckpt.model.params()[0].second.values() == fresh.params()[0].second.values());
}

TEST_CASE("train rejects contradictory settings") {
    TrainFixture fx;
    TrainConfig bad = fx.cfg;
    bad.lr = 0.0;
    CHECK_THROWS_AS(train(bad, fx.ds, fx.train_idx, fx.val_idx, (fx.dir / "x").string()),
                    ContractError);
    CHECK_THROWS_AS(train(fx.cfg, fx.ds, {}, fx.val_idx, (fx.dir / "x").string()),
                    ContractError);
}

TEST_CASE("finetune keeps whole campaigns apart") {
    TrainFixture fx;
    TrainResult base = train(fx.cfg, fx.ds, fx.train_idx, fx.val_idx,
                             (fx.dir / "ft_base").string());

    std::vector<int> pool;
    for (int i = 0; i < static_cast<int>(fx.ds.pairs.size()); ++i) pool.push_back(i);
    TrainConfig ft_cfg = fx.cfg;
    ft_cfg.epochs = 1;
    FinetuneResult ft = finetune(base.checkpoint_path, ft_cfg, fx.ds, pool, /*fraction=*/0.5,
                                 (fx.dir / "ft_run").string());

    // used + heldout partition the pool
    std::vector<int> joined = ft.used_idx;
    joined.insert(joined.end(), ft.heldout_idx.begin(), ft.heldout_idx.end());
    std::sort(joined.begin(), joined.end());
    CHECK(joined == pool);
    CHECK(!ft.used_idx.empty());
    CHECK(!ft.heldout_idx.empty());

    // no campaign appears on both sides
    std::set<std::string> used_ids, held_ids;
    for (int k : ft.used_idx) used_ids.insert(fx.ds.pairs[k].campaign.id);
    for (int k : ft.heldout_idx) held_ids.insert(fx.ds.pairs[k].campaign.id);
    for (const auto& id : used_ids) CHECK(held_ids.count(id) == 0);

    // half of six campaigns, whole campaigns each
    CHECK(used_ids.size() == 3);
    CHECK(held_ids.size() == 3);

    // normalization comes from the checkpoint, not recomputed on the subsample
    LoadedCheckpoint base_ckpt = load_checkpoint(base.checkpoint_path);
    CHECK(ft.result.stats.series[kVarCost].shift == base_ckpt.stats.series[kVarCost].shift);
    CHECK(ft.result.steps > 0);

    SUBCASE("fraction one takes everything") {
        FinetuneResult all = finetune(base.checkpoint_path, ft_cfg, fx.ds, pool, 1.0,
                                      (fx.dir / "ft_all").string());
        CHECK(all.heldout_idx.empty());
        CHECK(all.used_idx == pool);
    }
    SUBCASE("bad fraction is rejected") {
        CHECK_THROWS_AS(finetune(base.checkpoint_path, ft_cfg, fx.ds, pool, 0.0,
                                 (fx.dir / "ft_bad").string()),
                        ContractError);
    }
}

TEST_CASE("scaling sweep reports a point per width") {
    TrainFixture fx;
    TrainConfig base = fx.cfg;
    base.epochs = 1;
    std::vector<ScalingPoint> pts = scaling_sweep(base, fx.ds, fx.train_idx, fx.val_idx,
                                                  {8, 16}, {1, 2},
                                                  (fx.dir / "sweep").string());
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].d_model == 8);
    CHECK(pts[1].d_model == 16);
    for (const ScalingPoint& p : pts) {
        REQUIRE(p.per_seed.size() == 2);
        CHECK(p.mean_final_val_loss ==
              doctest::Approx(0.5 * (p.per_seed[0] + p.per_seed[1])));
        for (double v : p.per_seed) CHECK(std::isfinite(v));
    }
}
