#include "disrank/dataset.hpp"

#include "disrank/error.hpp"
#include "disrank/rng.hpp"
#include "disrank/tsv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <unordered_set>

namespace disrank {

namespace {

const std::vector<std::string_view> kInstanceHeader = {
    "instance_id", "lemma", "language", "context1", "target_index1", "context2", "target_index2"};
const std::vector<std::string_view> kJudgmentHeader = {"instance_id", "annotator_id", "judgment"};
const std::vector<std::string_view> kLabelHeader = {"instance_id", "mean_disagreement",
                                                    "num_judgments"};

std::int64_t parse_offset(const std::string& text, const std::filesystem::path& path,
                          std::size_t line, std::string_view column) {
    const auto value = tsv::parse_integer(text, path, line, column);
    if (value < 0) {
        throw ParseError(path.string(), line, fmt::format("column {}: negative offset", column));
    }
    return value;
}

} // namespace

std::vector<UsePair> parse_instances(const std::filesystem::path& path) {
    const auto rows = tsv::read_table(path, kInstanceHeader);
    std::vector<UsePair> pairs;
    pairs.reserve(rows.size());
    std::unordered_set<std::string> seen;
    for (const auto& row : rows) {
        const auto& f = row.fields;
        UsePair p;
        p.instance_id = f[0];
        p.lemma = f[1];
        p.language = f[2];
        p.context1 = f[3];
        p.target_index1 = parse_offset(f[4], path, row.line, "target_index1");
        p.context2 = f[5];
        p.target_index2 = parse_offset(f[6], path, row.line, "target_index2");
        if (p.instance_id.empty()) {
            throw ParseError(path.string(), row.line, "empty instance_id");
        }
        if (p.context1.empty() || p.context2.empty()) {
            throw ValidationError(fmt::format("{}:{}: instance {} has an empty context",
                                              path.string(), row.line, p.instance_id));
        }
        if (!seen.insert(p.instance_id).second) {
            throw ValidationError(fmt::format("{}:{}: duplicate instance_id {}", path.string(),
                                              row.line, p.instance_id));
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::vector<JudgmentRecord> parse_judgments(const std::filesystem::path& path) {
    const auto rows = tsv::read_table(path, kJudgmentHeader);
    std::vector<JudgmentRecord> records;
    records.reserve(rows.size());
    for (const auto& row : rows) {
        JudgmentRecord r;
        r.instance_id = row.fields[0];
        r.annotator_id = row.fields[1];
        const auto value = tsv::parse_integer(row.fields[2], path, row.line, "judgment");
        if (value < kMinJudgment || value > kMaxJudgment) {
            throw ValidationError(fmt::format(
                "{}:{}: judgment {} for instance {} is outside the 1-4 scale", path.string(),
                row.line, value, r.instance_id));
        }
        r.judgment = static_cast<int>(value);
        records.push_back(std::move(r));
    }
    return records;
}

double mean_pairwise_disagreement(std::span<const int> judgments) {
    const std::size_t n = judgments.size();
    if (n < 2) {
        throw InsufficientJudgmentsError(
            fmt::format("mean pairwise disagreement needs at least 2 judgments, got {}", n));
    }
    // Integer sum keeps the result independent of input order.
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            total += std::abs(judgments[i] - judgments[j]);
        }
    }
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    return static_cast<double>(total) / pairs;
}

LabeledDataset build_labeled_dataset(std::span<const UsePair> pairs,
                                     std::span<const JudgmentRecord> judgments) {
    std::map<std::string, const UsePair*> by_id;
    for (const auto& p : pairs) {
        by_id.emplace(p.instance_id, &p);
    }
    std::map<std::string, std::vector<int>> grouped;
    for (const auto& j : judgments) {
        if (!by_id.contains(j.instance_id)) {
            throw ValidationError(
                fmt::format("judgment by {} references unknown instance {}", j.annotator_id,
                            j.instance_id));
        }
        grouped[j.instance_id].push_back(j.judgment);
    }

    LabeledDataset out;
    for (const auto& [id, pair] : by_id) {
        const auto it = grouped.find(id);
        if (it == grouped.end() || it->second.size() < 2) {
            out.skipped.push_back(id);
            continue;
        }
        LabeledInstance li;
        li.pair = *pair;
        li.mean_disagreement = mean_pairwise_disagreement(it->second);
        li.num_judgments = static_cast<std::int64_t>(it->second.size());
        out.instances.push_back(std::move(li));
    }
    return out;
}

DataSplit split_train_validation(std::span<const LabeledInstance> data, double ratio,
                                 std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ValidationError(fmt::format("split ratio {} is not in (0, 1)", ratio));
    }
    if (data.size() < 2) {
        throw ValidationError(
            fmt::format("cannot split {} instance(s); need at least 2", data.size()));
    }
    std::vector<LabeledInstance> items(data.begin(), data.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return a.pair.instance_id < b.pair.instance_id;
    });
    SplitMix64 rng(seed);
    shuffle(std::span<LabeledInstance>(items), rng);

    const auto n = static_cast<long long>(items.size());
    const long long cut = std::clamp(std::llround(ratio * static_cast<double>(n)), 1LL, n - 1);

    DataSplit split;
    split.seed = seed;
    split.ratio = ratio;
    split.train.assign(std::make_move_iterator(items.begin()),
                       std::make_move_iterator(items.begin() + cut));
    split.validation.assign(std::make_move_iterator(items.begin() + cut),
                            std::make_move_iterator(items.end()));
    return split;
}

void write_labels(const std::filesystem::path& path, std::span<const LabeledInstance> labels) {
    std::string out = "instance_id\tmean_disagreement\tnum_judgments\n";
    for (const auto& l : labels) {
        out += fmt::format("{}\t{}\t{}\n", tsv::escape(l.pair.instance_id),
                           tsv::format_real(l.mean_disagreement), l.num_judgments);
    }
    tsv::write_file(path, out);
}

std::vector<LabeledInstance> read_labels(const std::filesystem::path& path) {
    const auto rows = tsv::read_table(path, kLabelHeader);
    std::vector<LabeledInstance> labels;
    labels.reserve(rows.size());
    std::unordered_set<std::string> seen;
    for (const auto& row : rows) {
        LabeledInstance l;
        l.pair.instance_id = row.fields[0];
        l.mean_disagreement = tsv::parse_real(row.fields[1], path, row.line, "mean_disagreement");
        l.num_judgments = tsv::parse_integer(row.fields[2], path, row.line, "num_judgments");
        if (l.mean_disagreement < 0.0 || l.mean_disagreement > 3.0) {
            throw ValidationError(fmt::format("{}:{}: label {} outside [0, 3]", path.string(),
                                              row.line, l.mean_disagreement));
        }
        if (l.num_judgments < 2) {
            throw ValidationError(fmt::format("{}:{}: num_judgments must be >= 2", path.string(),
                                              row.line));
        }
        if (!seen.insert(l.pair.instance_id).second) {
            throw ValidationError(fmt::format("{}:{}: duplicate instance_id {}", path.string(),
                                              row.line, l.pair.instance_id));
        }
        labels.push_back(std::move(l));
    }
    return labels;
}

void write_instances(const std::filesystem::path& path, std::span<const UsePair> pairs) {
    std::string out =
        "instance_id\tlemma\tlanguage\tcontext1\ttarget_index1\tcontext2\ttarget_index2\n";
    for (const auto& p : pairs) {
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", tsv::escape(p.instance_id),
                           tsv::escape(p.lemma), tsv::escape(p.language), tsv::escape(p.context1),
                           p.target_index1, tsv::escape(p.context2), p.target_index2);
    }
    tsv::write_file(path, out);
}

void write_judgments(const std::filesystem::path& path, std::span<const JudgmentRecord> records) {
    std::string out = "instance_id\tannotator_id\tjudgment\n";
    for (const auto& r : records) {
        out += fmt::format("{}\t{}\t{}\n", tsv::escape(r.instance_id), tsv::escape(r.annotator_id),
                           r.judgment);
    }
    tsv::write_file(path, out);
}

} // namespace disrank
