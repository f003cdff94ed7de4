// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maskhit/numcore/graph.hpp"

namespace maskhit {

/// Score used inside the contrastive softmax. kNegatedDistance scores a pair
/// by -||x_j - y_i||; kLiteral by +||x_j - y_i||.
enum class ContrastiveSign { kNegatedDistance, kLiteral };

const char* contrastive_sign_name(ContrastiveSign sign);
ContrastiveSign parse_contrastive_sign(const std::string& text);

struct RestorationConfig {
    double alpha = 2.0;
    double beta = 1.0;
    double tau = 0.1;
    ContrastiveSign sign = ContrastiveSign::kNegatedDistance;

    void validate() const;
};

/// Batch means of the two components and of the weighted total.
struct RestorationValues {
    double total = 0.0;
    double l2 = 0.0;           // mean ||x_i - y_i||
    double contrastive = 0.0;  // mean -log softmax_j(s_ij / tau) at j = i
};

/// Restoration loss between outputs y (k x d) and targets x (k x d); rows pair
/// by index. Gradients flow into `outputs` only.
struct RestorationTerms {
    Var total;
    RestorationValues values;
};
RestorationTerms restoration_loss(Graph& g, Var outputs, const Tensor& targets, const RestorationConfig& config);
RestorationValues restoration_loss_value(const Tensor& outputs, const Tensor& targets, const RestorationConfig& config);

/// Negative log Cox partial likelihood with Breslow risk sets {j : T_j >= T_i},
/// averaged over events. `risks` holds N scores in any shape.
Var cox_loss(Graph& g, Var risks, std::span<const double> times, std::span<const std::uint8_t> events);
double cox_loss_value(std::span<const double> risks, std::span<const double> times,
                      std::span<const std::uint8_t> events);

/// Mean negative log softmax at the labelled class. logits: N x C.
Var cross_entropy(Graph& g, Var logits, std::span<const std::size_t> labels);
double cross_entropy_value(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace maskhit
