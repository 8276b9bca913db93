#include "disrank/metrics.hpp"

#include "disrank/error.hpp"
#include "disrank/tsv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace disrank::metrics {

std::vector<double> average_ranks(std::span<const double> values) {
    if (values.empty()) {
        throw ValidationError("cannot rank an empty vector");
    }
    if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
        throw ValidationError("cannot rank non-finite values");
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        while (j < order.size() && values[order[j]] == values[order[i]]) {
            ++j;
        }
        // Positions i+1 .. j share their mean.
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j;
    }
    return ranks;
}

double spearman_rho(std::span<const double> pred, std::span<const double> gold) {
    if (pred.size() != gold.size()) {
        throw ValidationError(
            fmt::format("spearman: {} predictions vs {} gold values", pred.size(), gold.size()));
    }
    if (pred.size() < 2) {
        throw DegenerateRankingError("spearman needs at least 2 items");
    }
    const auto rp = average_ranks(pred);
    const auto rg = average_ranks(gold);
    // Average ranks always have mean (N + 1) / 2.
    const double mean = (static_cast<double>(rp.size()) + 1.0) / 2.0;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rp.size(); ++i) {
        const double dx = rp[i] - mean;
        const double dy = rg[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DegenerateRankingError("spearman is undefined for a constant vector");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

ScopeScore score(std::span<const double> pred, std::span<const double> gold,
                 const std::string& scope, std::vector<std::string>& warnings) {
    ScopeScore s;
    s.n = pred.size();
    if (s.n == 0) {
        return s;
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sq += (gold[i] - pred[i]) * (gold[i] - pred[i]);
    }
    s.mse = sq / static_cast<double>(s.n);
    try {
        s.spearman = spearman_rho(pred, gold);
    } catch (const DegenerateRankingError& e) {
        warnings.push_back(fmt::format("{}: spearman undefined ({})", scope, e.what()));
    }
    return s;
}

std::string cell(const std::optional<double>& v) {
    return v ? tsv::format_real(*v) : std::string("NA");
}

} // namespace

MetricReport evaluate_report(const PredictionMap& predictions,
                             std::span<const LabeledInstance> gold) {
    std::vector<std::string> missing;
    for (const auto& g : gold) {
        if (!predictions.contains(g.pair.instance_id)) {
            missing.push_back(g.pair.instance_id);
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) {
            list += (list.empty() ? "" : ", ") + id;
        }
        throw LookupError(fmt::format("{} instance(s) have no prediction: {}", missing.size(), list));
    }

    MetricReport report;
    std::vector<double> all_pred;
    std::vector<double> all_gold;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_lang;
    for (const auto& g : gold) {
        const double p = predictions.at(g.pair.instance_id);
        all_pred.push_back(p);
        all_gold.push_back(g.mean_disagreement);
        auto& [lp, lg] = by_lang[g.pair.language];
        lp.push_back(p);
        lg.push_back(g.mean_disagreement);
    }
    report.all = score(all_pred, all_gold, "ALL", report.warnings);

    double rho_sum = 0.0;
    std::size_t defined = 0;
    for (const auto& [lang, pg] : by_lang) {
        const std::string scope = lang.empty() ? std::string("(none)") : lang;
        auto s = score(pg.first, pg.second, scope, report.warnings);
        if (s.spearman) {
            rho_sum += *s.spearman;
            ++defined;
            report.avg.n += s.n;
        }
        report.per_language.emplace(scope, s);
    }
    if (defined > 0) {
        report.avg.spearman = rho_sum / static_cast<double>(defined);
    }
    return report;
}

std::string format_report(const MetricReport& report) {
    std::string out = "scope\tn\tspearman\tmse\n";
    for (const auto& [lang, s] : report.per_language) {
        out += fmt::format("{}\t{}\t{}\t{}\n", tsv::escape(lang), s.n, cell(s.spearman), cell(s.mse));
    }
    out += fmt::format("ALL\t{}\t{}\t{}\n", report.all.n, cell(report.all.spearman),
                       cell(report.all.mse));
    out += fmt::format("AVG\t{}\t{}\t{}\n", report.avg.n, cell(report.avg.spearman),
                       cell(report.avg.mse));
    return out;
}

} // namespace disrank::metrics
