#include "disrank/error.hpp"
#include "disrank/metrics.hpp"
#include "disrank/synthetic.hpp"
#include "disrank/trainer.hpp"
#include "disrank/tsv.hpp"
#include "support/temp_dir.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace disrank;
using testing_support::slurp;
using testing_support::TempDir;

namespace {

TrainConfig small_config(std::uint32_t dim) {
    TrainConfig c;
    c.epochs = 6;
    c.batch_size = 8;
    c.net.input_width = 2 * dim;
    c.net.hidden_widths = {16, 8};
    c.adamw.learning_rate = 1e-3;
    return c;
}

TrainConfig overfit_config(std::uint32_t dim) {
    TrainConfig c;
    c.epochs = 200;
    c.net.input_width = 2 * dim;
    c.net.hidden_widths = {32, 16};
    c.net.dropout_p = 0.0;
    c.adamw.learning_rate = 5e-3;
    // One batch holds the whole training split, so batch-norm statistics do
    // not change with shuffling, and the tiny validation split cannot trigger
    // learning-rate cuts.
    c.batch_size = 64;
    c.scheduler.patience = 1000;
    return c;
}

} // namespace

TEST(Train, IdenticalRunsProduceIdenticalBytes) {
    const auto fx = synthetic::make_affine_fixture(40, 4, 0.1, 3);
    TempDir a, b;
    const auto cfg = small_config(4);
    const auto ra = train(cfg, fx.instances, fx.store, {.out_dir = a.path()});
    const auto rb = train(cfg, fx.instances, fx.store, {.out_dir = b.path()});
    for (const char* f : {"checkpoint-best.nnck", "checkpoint-final.nnck", "history.tsv",
                          "manifest.txt"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    EXPECT_EQ(format_history(ra.history), format_history(rb.history));

    TempDir c;
    auto other = cfg;
    other.seed = 43;
    train(other, fx.instances, fx.store, {.out_dir = c.path()});
    EXPECT_NE(slurp(a / "checkpoint-final.nnck"), slurp(c / "checkpoint-final.nnck"));
}

TEST(Train, OutputInventoryAndManifest) {
    const auto fx = synthetic::make_affine_fixture(30, 4, 0.1, 3);
    TempDir dir;
    const auto run = train(small_config(4), fx.instances, fx.store, {.out_dir = dir.path()});
    ASSERT_TRUE(run.checkpoint_path.has_value());
    EXPECT_EQ(*run.checkpoint_path, dir / "checkpoint-best.nnck");
    const auto best = read_checkpoint(dir / "checkpoint-best.nnck");
    EXPECT_EQ(best.manifest.require("checkpoint_epoch"), std::to_string(run.best_epoch));
    const auto final_ck = read_checkpoint(dir / "checkpoint-final.nnck");
    EXPECT_EQ(final_ck.manifest.require("checkpoint_epoch"), "6");
    EXPECT_TRUE(final_ck.optimizer.has_value());

    const auto manifest = Manifest::parse(slurp(dir / "manifest.txt"));
    for (const char* key : {"epochs", "batch_size", "learning_rate", "seed", "dropout_p",
                            "weight_decay", "beta1", "beta2", "adam_epsilon", "max_grad_norm",
                            "scheduler_factor", "scheduler_patience", "min_lr", "hidden_widths"}) {
        EXPECT_TRUE(manifest.get(key).has_value()) << key;
    }
    EXPECT_EQ(manifest.require("seed"), "42");

    // The best checkpoint reproduces the in-memory best network.
    Matrix x(2, 8, 0.25);
    EXPECT_EQ(best.net.predict(x), run.best_net.predict(x));
}

TEST(Train, OverfitsExactAffineLabels) {
    const auto fx = synthetic::make_affine_fixture(64, 8, 0.0, 11);
    const auto run = train(overfit_config(8), fx.instances, fx.store);
    ASSERT_EQ(run.history.size(), 200u);
    double best_train = run.history.front().train_loss;
    for (const auto& r : run.history) best_train = std::min(best_train, r.train_loss);
    EXPECT_LT(run.history.back().train_loss, 1e-2);
    EXPECT_LT(best_train, 1e-2);

    // Predictions on the training instances track gold.
    std::map<std::string, double> label;
    for (const auto& inst : fx.instances) label[inst.pair.instance_id] = inst.mean_disagreement;
    std::vector<double> gold;
    std::vector<double> pred;
    for (const auto& p : predict(run.final_net, run.train_ids, fx.store)) {
        pred.push_back(p.value);
        gold.push_back(label.at(p.instance_id));
    }
    EXPECT_GT(metrics::spearman_rho(pred, gold), 0.9);
}

TEST(Train, TrainLossMostlyDecreasesEarly) {
    const auto fx = synthetic::make_affine_fixture(64, 8, 0.0, 11);
    auto cfg = overfit_config(8);
    cfg.epochs = 10;
    const auto run = train(cfg, fx.instances, fx.store);
    int rises = 0;
    for (std::size_t e = 1; e < run.history.size(); ++e) {
        if (run.history[e].train_loss > run.history[e - 1].train_loss) ++rises;
    }
    EXPECT_LE(rises, 2) << format_history(run.history);
}

TEST(Train, PreflightListsMissingKeys) {
    const auto fx = synthetic::make_affine_fixture(20, 4, 0.1, 3);
    EmbeddingStore partial(4);
    for (const auto& [key, vec] : fx.store.records()) {
        if (key != "syn00003#2" && key != "syn00007#1") partial.insert(key, vec);
    }
    std::int64_t batches = 0;
    try {
        train(small_config(4), fx.instances, partial,
              {.on_batch = [&](std::span<const std::string>) { ++batches; }});
        FAIL() << "expected LookupError";
    } catch (const LookupError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("syn00003#2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("syn00007#1"), std::string::npos) << msg;
    }
    EXPECT_EQ(batches, 0);
}

TEST(Train, RejectsBadInputs) {
    const auto fx = synthetic::make_affine_fixture(20, 4, 0.1, 3);
    auto wide = small_config(4);
    wide.net.input_width = 16;
    EXPECT_THROW(train(wide, fx.instances, fx.store), ValidationError);
    EXPECT_THROW(train(small_config(4), std::span(fx.instances).first(9), fx.store),
                 ValidationError);
    auto bad = small_config(4);
    bad.batch_size = 1;
    EXPECT_THROW(train(bad, fx.instances, fx.store), ValidationError);
}

TEST(Train, DivergenceKeepsCompletedHistory) {
    auto fx = synthetic::make_affine_fixture(20, 4, 0.0, 3);
    for (auto& inst : fx.instances) inst.mean_disagreement = 1e200;
    TempDir dir;
    try {
        train(small_config(4), fx.instances, fx.store, {.out_dir = dir.path()});
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        EXPECT_TRUE(e.history().empty());
    }
    EXPECT_EQ(slurp(dir / "history.tsv"), "epoch\ttrain_loss\tval_loss\tlr\n");
}

TEST(Train, ValidationInstancesNeverReachTheOptimizer) {
    const auto fx = synthetic::make_affine_fixture(45, 4, 0.1, 5);
    std::vector<std::vector<std::string>> batches;
    const auto run = train(small_config(4), fx.instances, fx.store,
                           {.on_batch = [&](std::span<const std::string> ids) {
                               batches.emplace_back(ids.begin(), ids.end());
                           }});
    const std::set<std::string> val(run.validation_ids.begin(), run.validation_ids.end());
    const std::set<std::string> trn(run.train_ids.begin(), run.train_ids.end());
    EXPECT_EQ(val.size() + trn.size(), 45u);
    EXPECT_EQ(run.train_ids.size(), 36u);
    // 36 train rows, batch 8: four full batches and one of 4 per epoch.
    ASSERT_EQ(batches.size(), 5u * 6u);
    std::size_t seen = 0;
    for (const auto& b : batches) {
        EXPECT_GE(b.size(), 2u);
        for (const auto& id : b) {
            EXPECT_FALSE(val.contains(id)) << id;
            EXPECT_TRUE(trn.contains(id)) << id;
        }
        seen += b.size();
    }
    EXPECT_EQ(seen, 36u * 6u);
    // Epoch orders differ.
    EXPECT_NE(batches[0], batches[5]);
}

TEST(Train, PartialBatchOfOneIsDropped) {
    const auto fx = synthetic::make_affine_fixture(21, 4, 0.1, 5);
    auto cfg = small_config(4);
    cfg.batch_size = 16;
    cfg.epochs = 1;
    std::vector<std::size_t> sizes;
    const auto run = train(cfg, fx.instances, fx.store,
                           {.on_batch = [&](std::span<const std::string> ids) {
                               sizes.push_back(ids.size());
                           }});
    ASSERT_EQ(run.train_ids.size(), 17u);
    EXPECT_EQ(sizes, (std::vector<std::size_t>{16}));
}

TEST(Train, BestEpochHasMinimalValidationLoss) {
    const auto fx = synthetic::make_affine_fixture(40, 4, 0.3, 8);
    auto cfg = small_config(4);
    cfg.epochs = 25;
    cfg.adamw.learning_rate = 1e-2;
    const auto run = train(cfg, fx.instances, fx.store);
    ASSERT_GE(run.best_epoch, 1);
    const double best = run.history[static_cast<std::size_t>(run.best_epoch - 1)].val_loss;
    for (const auto& r : run.history) EXPECT_LE(best, r.val_loss);
}

TEST(Train, LrColumnFollowsSchedulerSimulation) {
    const auto fx = synthetic::make_affine_fixture(40, 4, 0.5, 8);
    auto cfg = small_config(4);
    cfg.epochs = 40;
    cfg.adamw.learning_rate = 5e-2;
    cfg.scheduler.patience = 1;
    const auto run = train(cfg, fx.instances, fx.store);
    optim::PlateauScheduler sim(cfg.scheduler);
    double lr = cfg.adamw.learning_rate;
    int cuts = 0;
    for (const auto& r : run.history) {
        EXPECT_EQ(r.lr, lr) << "epoch " << r.epoch;
        const double next = sim.observe(r.val_loss, lr);
        if (next != lr) {
            EXPECT_EQ(next, std::max(lr * 0.5, cfg.scheduler.min_lr));
            ++cuts;
        }
        lr = next;
    }
    EXPECT_GT(cuts, 0);
}

TEST(History, RowsAndExactValues) {
    std::vector<EpochRecord> h;
    for (int e = 1; e <= 17; ++e) h.push_back({e, 1.0 / 3.0 + e, 0.1 * e, e > 10 ? 5e-5 : 1e-4});
    TempDir dir;
    emit_history(h, dir / "h.tsv");
    const auto table = tsv::read_table(dir / "h.tsv", {"epoch", "train_loss", "val_loss", "lr"});
    ASSERT_EQ(table.size(), 17u);
    EXPECT_EQ(std::strtod(table[0].fields[1].c_str(), nullptr), 1.0 / 3.0 + 1);
    EXPECT_EQ(table[11].fields[3], "5e-05");
    EXPECT_EQ(table[9].fields[3], "0.0001");

    emit_history(std::span(h).first(3), dir / "p.tsv");
    EXPECT_EQ(tsv::read_table(dir / "p.tsv", {"epoch", "train_loss", "val_loss", "lr"}).size(), 3u);
}

TEST(Predict, DeterministicOrderedAndEmpty) {
    const auto fx = synthetic::make_affine_fixture(30, 4, 0.1, 9);
    TempDir dir;
    train(small_config(4), fx.instances, fx.store, {.out_dir = dir.path()});
    std::vector<UsePair> pairs;
    for (auto it = fx.instances.rbegin(); it != fx.instances.rend(); ++it) pairs.push_back(it->pair);
    const auto a = predict(dir / "checkpoint-best.nnck", pairs, fx.store);
    const auto b = predict(dir / "checkpoint-best.nnck", pairs, fx.store);
    ASSERT_EQ(a.size(), pairs.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].instance_id, pairs[i].instance_id);
        EXPECT_EQ(a[i].value, b[i].value);
    }
    EXPECT_TRUE(predict(dir / "checkpoint-best.nnck", std::span<const UsePair>{}, fx.store).empty());

    write_predictions(dir / "p.tsv", a);
    const auto back = read_predictions(dir / "p.tsv");
    ASSERT_EQ(back.size(), a.size());
    EXPECT_NEAR(back[3].value, a[3].value, 5e-7);
    EXPECT_EQ(slurp(dir / "p.tsv").substr(0, 24), "instance_id\tprediction\n" + std::string(1, 's'));
}

TEST(Predict, MissingEmbeddingIsAnError) {
    const auto fx = synthetic::make_affine_fixture(30, 4, 0.1, 9);
    TempDir dir;
    train(small_config(4), fx.instances, fx.store, {.out_dir = dir.path()});
    UsePair ghost;
    ghost.instance_id = "ghost";
    EXPECT_THROW(predict(dir / "checkpoint-best.nnck", std::vector{ghost}, fx.store), LookupError);
}
