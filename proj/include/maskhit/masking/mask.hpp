// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "maskhit/featstore/sampling.hpp"

namespace maskhit {

/// Cells (row-major region indices) newly hidden by one block draw.
struct MaskBlock {
    std::vector<std::size_t> cells;
};

struct MaskPlan {
    std::vector<std::size_t> masked_positions;  // sorted ascending
    std::vector<MaskBlock> blocks;              // in draw order; partitions masked_positions
    double target_rate = 0.0;

    bool empty() const noexcept { return masked_positions.empty(); }
};

/// ceil(p * foreground), the number of cells a plan must reach.
std::size_t mask_target_count(double p, std::size_t foreground);

/// Blockwise masking: repeatedly hides a 4-connected block of 1-4 foreground
/// cells (a 1x1, 1x2, 2x1, 2x2, 1x3, 3x1, 1x4 or 4x1 rectangle around a random
/// unmasked foreground anchor, clipped to unmasked foreground) until at least
/// ceil(p * F) cells are hidden.
MaskPlan blockwise_mask(const RegionTensor& region, double p, Rng& rng);

/// Region with masked rows replaced by `token`; background flags untouched.
RegionTensor apply_mask(const RegionTensor& region, const MaskPlan& plan, std::span<const double> token);

// Replay layout, one line: "<rate>|<block>;<block>;..." with block cells
// separated by commas, e.g. "0.4|3,4;17;20,21,28,29".
std::string format_mask_plan(const MaskPlan& plan);
MaskPlan parse_mask_plan(const std::string& text);

}  // namespace maskhit
