#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace disrank {

/// Two uses of one lemma, each with the target token's offset.
struct UsePair {
    std::string instance_id;
    std::string lemma;
    std::string language;
    std::string context1;
    std::string context2;
    std::int64_t target_index1 = 0;
    std::int64_t target_index2 = 0;

    bool operator==(const UsePair&) const = default;
};

/// One annotator's rating of one pair on the 1..4 relatedness scale.
struct JudgmentRecord {
    std::string instance_id;
    std::string annotator_id;
    int judgment = 0;

    bool operator==(const JudgmentRecord&) const = default;
};

inline constexpr int kMinJudgment = 1;
inline constexpr int kMaxJudgment = 4;

/// A pair with its gold mean pairwise disagreement, in [0, 3].
struct LabeledInstance {
    UsePair pair;
    double mean_disagreement = 0.0;
    std::int64_t num_judgments = 0;
};

struct LabeledDataset {
    std::vector<LabeledInstance> instances; ///< sorted by instance_id
    std::vector<std::string> skipped;       ///< ids with fewer than 2 judgments
};

struct DataSplit {
    std::vector<LabeledInstance> train;
    std::vector<LabeledInstance> validation;
    std::uint64_t seed = 0;
    double ratio = 0.8;
};

std::vector<UsePair> parse_instances(const std::filesystem::path& path);
std::vector<JudgmentRecord> parse_judgments(const std::filesystem::path& path);

/// Mean of |a - b| over all unordered pairs of judgments. Needs at least two.
double mean_pairwise_disagreement(std::span<const int> judgments);

/// Groups judgments by pair and labels every pair that has at least two.
/// Judgments naming an unknown pair raise ValidationError.
LabeledDataset build_labeled_dataset(std::span<const UsePair> pairs,
                                     std::span<const JudgmentRecord> judgments);

/// Sorts by instance_id, shuffles with SplitMix64(seed), and cuts after
/// round(ratio * N) items (clamped so both sides keep at least one item).
DataSplit split_train_validation(std::span<const LabeledInstance> data, double ratio,
                                 std::uint64_t seed);

// Labels TSV: instance_id, mean_disagreement, num_judgments.
void write_labels(const std::filesystem::path& path, std::span<const LabeledInstance> labels);
std::vector<LabeledInstance> read_labels(const std::filesystem::path& path);

void write_instances(const std::filesystem::path& path, std::span<const UsePair> pairs);
void write_judgments(const std::filesystem::path& path, std::span<const JudgmentRecord> records);

} // namespace disrank
