// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maskhit/numcore/tensor.hpp"

namespace maskhit {

/// Harrell's concordance. Pair (i, j) is comparable when i has the event and
/// T_i < T_j, or T_i == T_j with both events (then both orders count). A pair
/// scores 1 when risk_i > risk_j and 0.5 on a risk tie. Throws DataError when
/// nothing is comparable.
double c_index(std::span<const double> risks, std::span<const double> times, std::span<const std::uint8_t> events);

struct AucResult {
    double value = 0.0;                 // mean over scored classes
    std::vector<std::size_t> classes;   // classes that were scored
    std::vector<double> per_class;      // one-vs-rest AUC, parallel to `classes`
    std::vector<std::string> warnings;  // one per skipped class
};

/// Macro one-vs-rest AUC from the midrank Mann-Whitney statistic. Column c of
/// `scores` (N x C) ranks class c. Classes with no positives or no negatives
/// are skipped with a warning; throws DataError if none remain.
AucResult macro_auc(const Tensor& scores, std::span<const std::size_t> labels);

/// One-vs-rest AUC of a single score column.
double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct EvalReport {
    std::string metric;               // "c_index" or "macro_auc"
    double value = 0.0;               // mean of fold_values
    std::vector<double> fold_values;  // repeat-major, fold-minor
    double mean = 0.0;
    double sd = 0.0;                  // sample standard deviation (n - 1); 0 for one value
};

EvalReport make_report(const std::string& metric, std::vector<double> fold_values);

/// Tab-separated: a header line then "fold<TAB>value" rows and mean/sd rows.
std::string format_report_tsv(const EvalReport& report);
std::string format_report_json(const EvalReport& report);
EvalReport parse_report_json(const std::string& text);

}  // namespace maskhit
