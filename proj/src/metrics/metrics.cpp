// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "maskhit/error.hpp"

namespace maskhit {

double c_index(std::span<const double> risks, std::span<const double> times, std::span<const std::uint8_t> events) {
    const std::size_t n = risks.size();
    if (times.size() != n || events.size() != n) throw ShapeError("c_index: risks, times and events differ in length");
    double credit = 0.0;
    std::size_t comparable = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!events[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const bool ok = times[i] < times[j] || (times[i] == times[j] && events[j]);
            if (!ok) continue;
            ++comparable;
            if (risks[i] > risks[j]) credit += 1.0;
            else if (risks[i] == risks[j]) credit += 0.5;
        }
    }
    if (comparable == 0) throw DataError("c_index: no comparable pairs");
    return credit / static_cast<double>(comparable);
}

double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
    const std::size_t n = scores.size();
    if (positive.size() != n) throw ShapeError("binary_auc: scores and labels differ in length");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Midranks: every member of a tied run gets the run's average 1-based rank.
    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t begin = 0; begin < n;) {
        std::size_t end = begin;
        while (end < n && scores[order[end]] == scores[order[begin]]) ++end;
        const double mid = 0.5 * static_cast<double>(begin + 1 + end);
        for (std::size_t r = begin; r < end; ++r) {
            if (positive[order[r]]) {
                rank_sum += mid;
                ++n_pos;
            }
        }
        begin = end;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("binary_auc: needs both positives and negatives");
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

AucResult macro_auc(const Tensor& scores, std::span<const std::size_t> labels) {
    if (scores.rank() != 2) throw ShapeError("macro_auc expects an N x C score matrix");
    const std::size_t n = scores.rows(), c = scores.cols();
    if (labels.size() != n) throw ShapeError("macro_auc: one label per row required");
    for (std::size_t y : labels) {
        if (y >= c) throw DataError("macro_auc: label " + std::to_string(y) + " has no score column");
    }
    AucResult out;
    std::vector<double> col(n);
    std::vector<std::uint8_t> pos(n);
    for (std::size_t k = 0; k < c; ++k) {
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = scores.at(i, k);
            pos[i] = labels[i] == k ? 1 : 0;
            n_pos += pos[i];
        }
        if (n_pos == 0 || n_pos == n) {
            out.warnings.push_back("class " + std::to_string(k) + (n_pos == 0 ? " absent" : " is every sample") +
                                   "; skipped in macro AUC");
            continue;
        }
        out.classes.push_back(k);
        out.per_class.push_back(binary_auc(col, pos));
    }
    if (out.classes.empty()) throw DataError("macro_auc: no class has both positives and negatives");
    out.value = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) /
                static_cast<double>(out.per_class.size());
    return out;
}

EvalReport make_report(const std::string& metric, std::vector<double> fold_values) {
    if (fold_values.empty()) throw DataError("report needs at least one value");
    EvalReport r;
    r.metric = metric;
    const double n = static_cast<double>(fold_values.size());
    r.mean = std::accumulate(fold_values.begin(), fold_values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : fold_values) ss += (v - r.mean) * (v - r.mean);
    r.sd = fold_values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    r.value = r.mean;
    r.fold_values = std::move(fold_values);
    return r;
}

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string format_report_tsv(const EvalReport& report) {
    std::ostringstream os;
    os << "# metric\t" << report.metric << '\n';
    os << "fold\tvalue\n";
    for (std::size_t i = 0; i < report.fold_values.size(); ++i) os << i << '\t' << g17(report.fold_values[i]) << '\n';
    os << "mean\t" << g17(report.mean) << '\n';
    os << "sd\t" << g17(report.sd) << '\n';
    return os.str();
}

std::string format_report_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["metric"] = report.metric;
    j["value"] = report.value;
    j["mean"] = report.mean;
    j["sd"] = report.sd;
    j["fold_values"] = report.fold_values;
    return j.dump(2) + "\n";
}

EvalReport parse_report_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        EvalReport r;
        r.metric = j.at("metric").get<std::string>();
        r.value = j.at("value").get<double>();
        r.mean = j.at("mean").get<double>();
        r.sd = j.at("sd").get<double>();
        r.fold_values = j.at("fold_values").get<std::vector<double>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report: ") + e.what());
    }
}

}  // namespace maskhit
