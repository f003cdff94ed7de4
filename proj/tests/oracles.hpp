// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

// Straightforward reference implementations used to cross-check the library.
// They favour obviousness over speed or numerical care.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "maskhit/numcore/tensor.hpp"

namespace maskhit::testing {

/// Negative log partial likelihood, one explicit risk-set loop per event.
inline double naive_cox(const std::vector<double>& h, const std::vector<double>& t, const std::vector<std::uint8_t>& e) {
    double total = 0.0;
    int events = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!e[i]) continue;
        double risk = 0.0;
        for (std::size_t j = 0; j < h.size(); ++j) {
            if (t[j] >= t[i]) risk += std::exp(h[j]);
        }
        total += h[i] - std::log(risk);
        ++events;
    }
    return -total / events;
}

/// Concordance over unordered pairs. Counts are kept in half units so the
/// result is exact.
inline double naive_c_index(const std::vector<double>& r, const std::vector<double>& t,
                            const std::vector<std::uint8_t>& e) {
    long long half_credit = 0, pairs = 0;
    auto score = [&](std::size_t early, std::size_t late) {
        ++pairs;
        if (r[early] > r[late]) half_credit += 2;
        else if (r[early] == r[late]) half_credit += 1;
    };
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t j = i + 1; j < r.size(); ++j) {
            if (t[i] < t[j]) {
                if (e[i]) score(i, j);
            } else if (t[j] < t[i]) {
                if (e[j]) score(j, i);
            } else if (e[i] && e[j]) {
                score(i, j);
                score(j, i);
            }
        }
    }
    return static_cast<double>(half_credit) / 2.0 / static_cast<double>(pairs);
}

struct NaiveRestoration {
    double l2 = 0.0;
    double contrastive = 0.0;
};

/// Mean ||x_i - y_i|| and mean -log of the softmax over distance scores,
/// with score sign `sign` (-1 negated, +1 literal).
inline NaiveRestoration naive_restoration(const Tensor& y, const Tensor& x, double tau, double sign) {
    const std::size_t k = y.rows(), d = y.cols();
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += (x.at(j, c) - y.at(i, c)) * (x.at(j, c) - y.at(i, c));
        return std::sqrt(s);
    };
    NaiveRestoration out;
    for (std::size_t i = 0; i < k; ++i) {
        out.l2 += dist(i, i);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(sign * dist(i, j) / tau);
        out.contrastive += -std::log(std::exp(sign * dist(i, i) / tau) / denom);
    }
    out.l2 /= static_cast<double>(k);
    out.contrastive /= static_cast<double>(k);
    return out;
}

/// One-vs-rest AUC by enumerating every (positive, negative) pair, averaged
/// over classes that have both.
inline double naive_macro_auc(const Tensor& scores, const std::vector<std::size_t>& labels) {
    double sum = 0.0;
    int classes = 0;
    for (std::size_t c = 0; c < scores.cols(); ++c) {
        long long half_wins = 0, pairs = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] != c) continue;
            for (std::size_t j = 0; j < labels.size(); ++j) {
                if (labels[j] == c) continue;
                ++pairs;
                if (scores.at(i, c) > scores.at(j, c)) half_wins += 2;
                else if (scores.at(i, c) == scores.at(j, c)) half_wins += 1;
            }
        }
        if (pairs == 0) continue;
        sum += static_cast<double>(half_wins) / 2.0 / static_cast<double>(pairs);
        ++classes;
    }
    return sum / classes;
}

/// Product A_1 A_2 ... A_L of row-stochastic matrices with optional residual
/// mixing (A + I) / 2, computed with explicit loops.
inline std::vector<double> naive_rollout(const std::vector<std::vector<double>>& layers, std::size_t s, bool residual,
                                         bool later_left) {
    std::vector<double> acc(s * s, 0.0);
    for (std::size_t i = 0; i < s; ++i) acc[i * s + i] = 1.0;
    for (const auto& raw : layers) {
        std::vector<double> a = raw;
        if (residual) {
            for (std::size_t i = 0; i < s; ++i) {
                for (std::size_t j = 0; j < s; ++j) a[i * s + j] = 0.5 * (a[i * s + j] + (i == j ? 1.0 : 0.0));
            }
        }
        std::vector<double> next(s * s, 0.0);
        const std::vector<double>& left = later_left ? a : acc;
        const std::vector<double>& right = later_left ? acc : a;
        for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < s; ++j) {
                double v = 0.0;
                for (std::size_t m = 0; m < s; ++m) v += left[i * s + m] * right[m * s + j];
                next[i * s + j] = v;
            }
        }
        acc = std::move(next);
    }
    return acc;
}

}  // namespace maskhit::testing
