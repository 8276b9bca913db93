#pragma once

#include "disrank/dataset.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace disrank::metrics {

/// 1-based ascending ranks; tied values share the mean of the positions they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of the average-rank vectors. Exact under ties; equals
/// 1 - 6 sum(d^2) / (N (N^2 - 1)) when neither side has ties.
/// Throws DegenerateRankingError if either side is constant.
double spearman_rho(std::span<const double> pred, std::span<const double> gold);

struct ScopeScore {
    std::size_t n = 0;
    std::optional<double> spearman; ///< empty when undefined (n < 2 or constant gold)
    std::optional<double> mse;
};

struct MetricReport {
    ScopeScore all;
    ScopeScore avg; ///< spearman = unweighted mean over defined languages
    std::map<std::string, ScopeScore> per_language;
    std::vector<std::string> warnings;
};

using PredictionMap = std::unordered_map<std::string, double>;

/// Every gold instance must have a prediction; missing ids raise LookupError
/// listing all of them.
MetricReport evaluate_report(const PredictionMap& predictions,
                             std::span<const LabeledInstance> gold);

/// TSV: scope, n, spearman, mse; one row per language, then ALL and AVG.
std::string format_report(const MetricReport& report);

} // namespace disrank::metrics
