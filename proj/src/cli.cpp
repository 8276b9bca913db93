#include "disrank/cli.hpp"

#include "disrank/config.hpp"
#include "disrank/dataset.hpp"
#include "disrank/embedding_store.hpp"
#include "disrank/metrics.hpp"
#include "disrank/trainer.hpp"
#include "disrank/tsv.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <ostream>
#include <unordered_map>

namespace disrank::cli {

namespace {

std::string train_footer() {
    const auto defaults = config::resolved(TrainConfig{});
    std::string s = "\nConfig keys (config file lines `key=value`, or --set key=value):\n";
    for (const auto& k : config::known_keys()) {
        s += fmt::format("  {:<20} {} (default {})\n", k.key, k.description,
                         defaults.require(k.key));
    }
    s += "\nFixed choices recorded in every manifest: inverted dropout, unbiased BN running\n"
         "variance, uniform(+-sqrt(6/fan_in)) init, no weight decay on biases or BN params,\n"
         "partial batches smaller than 2 dropped, best-validation checkpoint used for prediction.\n";
    return s;
}

int compute_labels(const std::string& instances, const std::string& judgments,
                   const std::string& out_path, std::ostream& out, std::ostream& err) {
    const auto pairs = parse_instances(instances);
    const auto records = parse_judgments(judgments);
    const auto data = build_labeled_dataset(pairs, records);
    write_labels(out_path, data.instances);
    out << fmt::format("labeled {} instance(s), skipped {}\n", data.instances.size(),
                       data.skipped.size());
    if (!data.skipped.empty()) {
        std::string ids;
        for (const auto& id : data.skipped) {
            ids += (ids.empty() ? "" : ", ") + id;
        }
        err << fmt::format("warning: skipped {} instance(s) with fewer than 2 judgments: {}\n",
                           data.skipped.size(), ids);
    }
    return 0;
}

int train_cmd(const std::string& labels_path, const std::string& embeddings_path,
              const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir, std::ostream& out, std::ostream& err) {
    Manifest entries;
    if (!config_path.empty()) {
        entries = config::read_file(config_path);
    }
    for (const auto& o : overrides) {
        auto [k, v] = config::split_assignment(o);
        entries.set(std::move(k), std::move(v));
    }
    const auto cfg = config::apply(TrainConfig{}, entries);
    out << "# resolved config\n" << config::resolved(cfg).serialize();

    const auto store = read_store(embeddings_path);
    if (2ULL * store.dim() != cfg.net.input_width) {
        err << fmt::format("error: dimension mismatch: expected input width {} (embedding dim {}), "
                           "found embedding dim {} (input width {})\n",
                           cfg.net.input_width, cfg.net.input_width / 2, store.dim(),
                           2ULL * store.dim());
        return 1;
    }
    const auto labels = read_labels(labels_path);

    TrainOptions options;
    options.out_dir = out_dir;
    options.on_epoch = [&err](const EpochRecord& r) {
        err << fmt::format("epoch {:>3}  train_loss {:.6f}  val_loss {:.6f}  lr {}\n", r.epoch,
                           r.train_loss, r.val_loss, format_exact(r.lr));
    };
    try {
        const auto run = train(cfg, labels, store, options);
        out << fmt::format("best epoch {} (val_loss {:.6f}); artifacts in {}\n", run.best_epoch,
                           run.history[static_cast<std::size_t>(run.best_epoch - 1)].val_loss,
                           out_dir);
    } catch (const DivergenceError& e) {
        err << fmt::format("error: {} ({} epoch(s) of history kept)\n", e.what(),
                           e.history().size());
        return 1;
    }
    return 0;
}

int predict_cmd(const std::string& checkpoint, const std::string& instances,
                const std::string& embeddings, const std::string& out_path, std::ostream& out) {
    const auto pairs = parse_instances(instances);
    const auto store = read_store(embeddings);
    const auto preds = predict(checkpoint, pairs, store);
    write_predictions(out_path, preds);
    out << fmt::format("wrote {} prediction(s) to {}\n", preds.size(), out_path);
    return 0;
}

int evaluate_cmd(const std::string& predictions_path, const std::string& labels_path,
                 const std::string& instances_path, const std::string& out_path,
                 std::ostream& out) {
    const auto preds = read_predictions(predictions_path);
    metrics::PredictionMap by_id;
    for (const auto& p : preds) {
        by_id.emplace(p.instance_id, p.value);
    }
    const auto pairs = parse_instances(instances_path);
    std::unordered_map<std::string, const UsePair*> pair_by_id;
    for (const auto& p : pairs) {
        pair_by_id.emplace(p.instance_id, &p);
    }
    auto gold = read_labels(labels_path);
    for (auto& g : gold) {
        const auto it = pair_by_id.find(g.pair.instance_id);
        if (it == pair_by_id.end()) {
            throw ValidationError(
                fmt::format("label {} has no row in {}", g.pair.instance_id, instances_path));
        }
        g.pair = *it->second;
    }
    const auto report = metrics::evaluate_report(by_id, gold);
    const auto text = metrics::format_report(report);
    tsv::write_file(out_path, text);
    out << text;
    return 0;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Annotator-disagreement ranking: labels, training, prediction, evaluation",
                 "disrank"};
    app.require_subcommand(1);

    std::string instances, judgments, labels, embeddings, config_path, out_path, out_dir,
        checkpoint, predictions;
    std::vector<std::string> overrides;

    auto* labels_cmd = app.add_subcommand(
        "compute-labels", "Mean pairwise disagreement labels from instances + judgments");
    labels_cmd->add_option("--instances", instances, "Instances TSV")->required();
    labels_cmd->add_option("--judgments", judgments, "Judgments TSV")->required();
    labels_cmd->add_option("--out", out_path, "Labels TSV to write")->required();

    auto* train_sub = app.add_subcommand("train", "Train the regression network");
    train_sub->add_option("--labels", labels, "Labels TSV")->required();
    train_sub->add_option("--embeddings", embeddings, "EMBS embedding store")->required();
    train_sub->add_option("--config", config_path, "key=value config file");
    train_sub->add_option("--set", overrides, "Override a config key (key=value), repeatable");
    train_sub->add_option("--out-dir", out_dir, "Directory for checkpoints, manifest, history")
        ->required();
    train_sub->footer(train_footer());

    auto* predict_sub = app.add_subcommand("predict", "Predict disagreement with a checkpoint");
    predict_sub->add_option("--checkpoint", checkpoint, "NNCK checkpoint")->required();
    predict_sub->add_option("--instances", instances, "Instances TSV")->required();
    predict_sub->add_option("--embeddings", embeddings, "EMBS embedding store")->required();
    predict_sub->add_option("--out", out_path, "Predictions TSV to write")->required();

    auto* eval_sub = app.add_subcommand("evaluate", "Spearman/MSE report per language");
    eval_sub->add_option("--predictions", predictions, "Predictions TSV")->required();
    eval_sub->add_option("--labels", labels, "Gold labels TSV")->required();
    eval_sub->add_option("--instances", instances, "Instances TSV (for languages)")->required();
    eval_sub->add_option("--out", out_path, "Report TSV to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*labels_cmd) {
            return compute_labels(instances, judgments, out_path, out, err);
        }
        if (*train_sub) {
            return train_cmd(labels, embeddings, config_path, overrides, out_dir, out, err);
        }
        if (*predict_sub) {
            return predict_cmd(checkpoint, instances, embeddings, out_path, out);
        }
        if (*eval_sub) {
            return evaluate_cmd(predictions, labels, instances, out_path, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace disrank::cli
