#include "disrank/trainer.hpp"

#include "disrank/rng.hpp"
#include "disrank/tsv.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace disrank {

namespace {

constexpr std::size_t kPredictBatch = 256;
constexpr std::uint64_t kDropoutStream = 1;

std::string join_keys(std::span<const std::string> keys) {
    return fmt::format("{}", fmt::join(keys, ", "));
}

void check_store_width(const EmbeddingStore& store, const nn::NetConfig& net) {
    if (2ULL * store.dim() != net.input_width) {
        throw ValidationError(fmt::format(
            "embedding dimension mismatch: network expects input width {} (dim {}), "
            "store has dim {} (input width {})",
            net.input_width, net.input_width / 2, store.dim(), 2ULL * store.dim()));
    }
}

void require_keys(const EmbeddingStore& store, std::span<const std::string> ids) {
    const auto missing = missing_keys(store, ids);
    if (!missing.empty()) {
        throw LookupError(fmt::format("{} embedding key(s) missing: {}", missing.size(),
                                      join_keys(missing)));
    }
}

Matrix features(const EmbeddingStore& store, std::span<const std::string> ids) {
    Matrix m(ids.size(), 2ULL * store.dim());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const auto f = pair_feature(store, ids[r]);
        std::copy(f.x.begin(), f.x.end(), m.row(r).begin());
    }
    return m;
}

Matrix gather(const Matrix& source, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), source.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = source.row(rows[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

} // namespace

void validate(const TrainConfig& c) {
    if (c.epochs < 1) {
        throw ValidationError("epochs must be >= 1");
    }
    if (c.batch_size < 2) {
        throw ValidationError("batch_size must be >= 2 (batch normalization needs two rows)");
    }
    if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) {
        throw ValidationError("split_ratio must be in (0, 1)");
    }
    if (!(c.max_grad_norm > 0.0)) {
        throw ValidationError("max_grad_norm must be positive");
    }
    nn::validate(c.net);
    // Constructors carry the remaining range checks.
    optim::AdamW probe(c.adamw);
    optim::PlateauScheduler sched(c.scheduler);
    (void)probe;
    (void)sched;
}

Manifest run_manifest(const TrainConfig& c) {
    Manifest m;
    m.set("epochs", std::to_string(c.epochs));
    m.set("batch_size", std::to_string(c.batch_size));
    m.set("learning_rate", format_exact(c.adamw.learning_rate));
    m.set("split_ratio", format_exact(c.split_ratio));
    m.set("seed", std::to_string(c.seed));
    m.set("max_grad_norm", format_exact(c.max_grad_norm));
    m.set("weight_decay", format_exact(c.adamw.weight_decay));
    m.set("beta1", format_exact(c.adamw.beta1));
    m.set("beta2", format_exact(c.adamw.beta2));
    m.set("adam_epsilon", format_exact(c.adamw.epsilon));
    m.set("scheduler_factor", format_exact(c.scheduler.factor));
    m.set("scheduler_patience", std::to_string(c.scheduler.patience));
    m.set("scheduler_threshold", format_exact(c.scheduler.threshold));
    m.set("min_lr", format_exact(c.scheduler.min_lr));
    describe_net(c.net, m);
    m.set("init", "uniform(+-sqrt(6/fan_in)) weights, zero bias, bn gamma=1 beta=0");
    m.set("block_order", "dense,batchnorm,relu,dropout");
    m.set("dropout", "inverted");
    m.set("init_rng", "splitmix64(seed)");
    m.set("dropout_rng", "splitmix64(mix_seed(seed, 1)), one stream for the whole run");
    m.set("bn_running_var", "unbiased");
    m.set("weight_decay_scope", "dense weights only");
    m.set("split", "sort by instance_id, splitmix64 fisher-yates with seed");
    m.set("epoch_shuffle_seed", "seed xor epoch (1-based)");
    m.set("partial_batch", "dropped when smaller than 2");
    return m;
}

TrainRun train(const TrainConfig& config, std::span<const LabeledInstance> labeled,
               const EmbeddingStore& store, const TrainOptions& options) {
    validate(config);
    if (labeled.size() < kMinTrainingInstances) {
        throw ValidationError(fmt::format("training needs at least {} labeled instances, got {}",
                                          kMinTrainingInstances, labeled.size()));
    }
    std::vector<std::string> all_ids;
    all_ids.reserve(labeled.size());
    for (const auto& l : labeled) {
        all_ids.push_back(l.pair.instance_id);
    }
    require_keys(store, all_ids);
    check_store_width(store, config.net);

    const auto split = split_train_validation(labeled, config.split_ratio, config.seed);
    if (split.train.size() < 2) {
        throw ValidationError("training split has fewer than 2 instances");
    }
    std::vector<std::string> train_ids;
    std::vector<double> train_y;
    for (const auto& l : split.train) {
        train_ids.push_back(l.pair.instance_id);
        train_y.push_back(l.mean_disagreement);
    }
    std::vector<std::string> val_ids;
    std::vector<double> val_y;
    for (const auto& l : split.validation) {
        val_ids.push_back(l.pair.instance_id);
        val_y.push_back(l.mean_disagreement);
    }
    const Matrix train_x = features(store, train_ids);
    const Matrix val_x = features(store, val_ids);

    auto net = nn::RegressionNet::initialize(config.net, config.seed);
    SplitMix64 dropout_rng(mix_seed(config.seed, kDropoutStream));
    optim::AdamW optimizer(config.adamw);
    optim::PlateauScheduler scheduler(config.scheduler);
    const optim::ClipConfig clip{config.max_grad_norm};

    const Manifest manifest = run_manifest(config);
    if (options.out_dir) {
        std::filesystem::create_directories(*options.out_dir);
    }
    auto save_history = [&](std::span<const EpochRecord> history) {
        if (options.out_dir) {
            emit_history(history, *options.out_dir / "history.tsv");
        }
    };

    std::vector<EpochRecord> history;
    std::optional<nn::RegressionNet> best_net;
    double best_val = std::numeric_limits<double>::infinity();
    std::int64_t best_epoch = 0;
    std::optional<std::filesystem::path> best_path;

    const auto batch = static_cast<std::size_t>(config.batch_size);
    std::vector<std::size_t> order(train_ids.size());

    for (std::int64_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        SplitMix64 shuffler(config.seed ^ static_cast<std::uint64_t>(epoch));
        shuffle(std::span<std::size_t>(order), shuffler);

        net.set_mode(nn::Mode::train);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t size = std::min(batch, order.size() - start);
            if (size < 2) {
                continue;
            }
            const std::span<const std::size_t> rows(order.data() + start, size);
            if (options.on_batch) {
                std::vector<std::string> ids;
                for (auto r : rows) {
                    ids.push_back(train_ids[r]);
                }
                options.on_batch(ids);
            }
            const Matrix x = gather(train_x, rows);
            std::vector<double> y;
            for (auto r : rows) {
                y.push_back(train_y[r]);
            }
            auto fwd = net.forward(x, dropout_rng);
            const double loss = nn::mse_loss(fwd.predictions, y);
            if (!std::isfinite(loss)) {
                save_history(history);
                throw DivergenceError(
                    fmt::format("training loss became non-finite in epoch {}", epoch), history);
            }
            loss_sum += loss * static_cast<double>(size);
            seen += size;
            auto grads = net.backward(fwd.cache, nn::mse_gradient(fwd.predictions, y));
            try {
                optim::clip_gradients(grads.tensors, clip);
            } catch (const ValidationError& e) {
                save_history(history);
                throw DivergenceError(fmt::format("epoch {}: {}", epoch, e.what()), history);
            }
            optimizer.step(net.parameters(), grads.tensors);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        const auto val_pred = net.predict(val_x);
        rec.val_loss = nn::mse_loss(val_pred, val_y);
        rec.lr = optimizer.learning_rate();
        if (!std::isfinite(rec.val_loss)) {
            save_history(history);
            throw DivergenceError(fmt::format("validation loss became non-finite in epoch {}", epoch),
                                  history);
        }
        history.push_back(rec);
        optimizer.set_learning_rate(scheduler.observe(rec.val_loss, rec.lr));

        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best_epoch = epoch;
            best_net = net;
            if (options.out_dir) {
                Manifest m = manifest;
                m.set("checkpoint_epoch", std::to_string(epoch));
                best_path = *options.out_dir / "checkpoint-best.nnck";
                write_checkpoint(*best_path, net, m, &optimizer);
            }
        }
        if (options.on_epoch) {
            options.on_epoch(rec);
        }
    }

    if (options.out_dir) {
        Manifest m = manifest;
        m.set("checkpoint_epoch", std::to_string(config.epochs));
        write_checkpoint(*options.out_dir / "checkpoint-final.nnck", net, m, &optimizer);
        tsv::write_file(*options.out_dir / "manifest.txt", manifest.serialize());
        save_history(history);
    }

    net.set_mode(nn::Mode::eval);
    best_net->set_mode(nn::Mode::eval);
    return TrainRun{config,
                    std::move(history),
                    best_epoch,
                    std::move(train_ids),
                    std::move(val_ids),
                    std::move(*best_net),
                    std::move(net),
                    best_path};
}

std::vector<Prediction> predict(const nn::RegressionNet& net, std::span<const std::string> ids,
                                const EmbeddingStore& store) {
    std::vector<Prediction> out;
    if (ids.empty()) {
        return out;
    }
    require_keys(store, ids);
    check_store_width(store, net.config());
    out.reserve(ids.size());
    for (std::size_t start = 0; start < ids.size(); start += kPredictBatch) {
        const auto chunk = ids.subspan(start, std::min(kPredictBatch, ids.size() - start));
        const auto values = net.predict(features(store, chunk));
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            out.push_back({chunk[i], values[i]});
        }
    }
    return out;
}

std::vector<Prediction> predict(const std::filesystem::path& checkpoint,
                                std::span<const UsePair> pairs, const EmbeddingStore& store) {
    const auto ck = read_checkpoint(checkpoint);
    std::vector<std::string> ids;
    ids.reserve(pairs.size());
    for (const auto& p : pairs) {
        ids.push_back(p.instance_id);
    }
    return predict(ck.net, ids, store);
}

std::string format_history(std::span<const EpochRecord> history) {
    std::string out = "epoch\ttrain_loss\tval_loss\tlr\n";
    for (const auto& r : history) {
        out += fmt::format("{}\t{}\t{}\t{}\n", r.epoch, format_exact(r.train_loss),
                           format_exact(r.val_loss), format_exact(r.lr));
    }
    return out;
}

void emit_history(std::span<const EpochRecord> history, const std::filesystem::path& path) {
    tsv::write_file(path, format_history(history));
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds) {
    std::string out = "instance_id\tprediction\n";
    for (const auto& p : preds) {
        out += fmt::format("{}\t{}\n", tsv::escape(p.instance_id), tsv::format_real(p.value));
    }
    tsv::write_file(path, out);
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
    const auto rows = tsv::read_table(path, {"instance_id", "prediction"});
    std::vector<Prediction> preds;
    preds.reserve(rows.size());
    std::unordered_set<std::string> seen;
    for (const auto& row : rows) {
        if (!seen.insert(row.fields[0]).second) {
            throw ValidationError(fmt::format("{}:{}: duplicate prediction for {}", path.string(),
                                              row.line, row.fields[0]));
        }
        preds.push_back(
            {row.fields[0], tsv::parse_real(row.fields[1], path, row.line, "prediction")});
    }
    return preds;
}

} // namespace disrank
