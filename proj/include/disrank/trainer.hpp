#pragma once

#include "disrank/checkpoint.hpp"
#include "disrank/dataset.hpp"
#include "disrank/embedding_store.hpp"
#include "disrank/error.hpp"
#include "disrank/nn.hpp"
#include "disrank/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace disrank {

struct TrainConfig {
    std::int64_t epochs = 17;
    std::int64_t batch_size = 32;
    double split_ratio = 0.8;
    std::uint64_t seed = 42;
    double max_grad_norm = 1.0;
    nn::NetConfig net;
    optim::AdamWConfig adamw;
    optim::PlateauConfig scheduler;

    bool operator==(const TrainConfig&) const = default;
};

/// Throws ValidationError describing the first violated constraint.
void validate(const TrainConfig& config);

/// Every hyperparameter, including the ones that only have defaults, plus
/// fixed descriptors of the initialization and batching scheme.
Manifest run_manifest(const TrainConfig& config);

struct EpochRecord {
    std::int64_t epoch = 0; ///< 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0; ///< learning rate in effect during this epoch
};

struct TrainOptions {
    /// When set, checkpoint-best.nnck is rewritten at every new best
    /// validation loss; checkpoint-final.nnck, manifest.txt and history.tsv
    /// are written at the end (history also on divergence).
    std::optional<std::filesystem::path> out_dir = {};
    std::function<void(const EpochRecord&)> on_epoch = {};
    /// Called with the instance ids of every training batch.
    std::function<void(std::span<const std::string>)> on_batch = {};
};

struct TrainRun {
    TrainConfig config;
    std::vector<EpochRecord> history;
    std::int64_t best_epoch = 0; ///< 1-based, epoch with minimal val_loss
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
    nn::RegressionNet best_net;
    nn::RegressionNet final_net;
    std::optional<std::filesystem::path> checkpoint_path; ///< best checkpoint
};

/// A non-finite loss stopped the run; the completed epochs are kept.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::vector<EpochRecord> history)
        : Error(what), m_history(std::move(history)) {}
    const std::vector<EpochRecord>& history() const noexcept { return m_history; }

private:
    std::vector<EpochRecord> m_history;
};

inline constexpr std::size_t kMinTrainingInstances = 10;

TrainRun train(const TrainConfig& config, std::span<const LabeledInstance> labeled,
               const EmbeddingStore& store, const TrainOptions& options = {});

struct Prediction {
    std::string instance_id;
    double value = 0.0;
};

/// Eval-mode predictions in input order.
std::vector<Prediction> predict(const nn::RegressionNet& net, std::span<const std::string> ids,
                                const EmbeddingStore& store);
std::vector<Prediction> predict(const std::filesystem::path& checkpoint,
                                std::span<const UsePair> pairs, const EmbeddingStore& store);

/// TSV `epoch train_loss val_loss lr`; values use the shortest exact
/// decimal form so they re-parse to the same doubles.
std::string format_history(std::span<const EpochRecord> history);
void emit_history(std::span<const EpochRecord> history, const std::filesystem::path& path);
inline void emit_history(const TrainRun& run, const std::filesystem::path& path) {
    emit_history(run.history, path);
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> preds);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

} // namespace disrank
