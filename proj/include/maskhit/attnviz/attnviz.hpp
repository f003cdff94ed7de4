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

enum class RolloutOrder {
    kLaterLeft,    // A_L * ... * A_1
    kEarlierLeft,  // A_1 * ... * A_L
};

struct RolloutOptions {
    bool residual = false;  // use (A + I) / 2 per layer
    RolloutOrder order = RolloutOrder::kLaterLeft;
};

/// Mean over heads of one layer's H x S x S weights.
Tensor head_average(const Tensor& layer);

/// Product of the head-averaged layers, S x S. Throws ShapeError on an empty
/// stack or mismatched layer shapes.
Tensor rollout(std::span<const Tensor> layers, const RolloutOptions& options = {});

/// n x n grid of values; cells with present == 0 carry no value.
struct Heatmap {
    std::size_t side = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> present;

    double min() const;  // over present cells; NaN if none
    double max() const;
    friend bool operator==(const Heatmap&, const Heatmap&) = default;
};

/// Row `query` of a rollout matrix, columns 1..n^2, laid on the n x n grid.
/// Background cells are absent.
Heatmap class_attention_map(const Tensor& rollout_matrix, std::span<const std::uint8_t> background,
                            std::size_t side, std::size_t query = 0);

/// finetuned - pretrained on present cells; geometry and absent sets must match.
Heatmap diff_map(const Heatmap& finetuned, const Heatmap& pretrained);

// P5 graymap: "P5\n<n> <n>\n255\n" then n*n bytes, row by row. Present cells
// map to round(255 * (v - min) / (max - min)), or 255 when max == min; absent
// cells are 0. The sidecar line is "min=<v> max=<v>\n" with %.17g values.
std::string encode_pgm(const Heatmap& map);
std::string pgm_sidecar(const Heatmap& map);

// Text: "# n=<n> absent=NA min=<v> max=<v>\n", then n lines of n
// tab-separated %.17g values with NA for absent cells.
std::string encode_heatmap_text(const Heatmap& map);
Heatmap decode_heatmap_text(const std::string& text);

enum class HeatmapFormat { kPgm, kText };

/// Writes `path`; the P5 format also writes `path + ".bounds"`.
void export_heatmap(const Heatmap& map, const std::string& path, HeatmapFormat format);

}  // namespace maskhit
