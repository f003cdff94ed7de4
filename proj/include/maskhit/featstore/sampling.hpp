// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskhit/featstore/store.hpp"
#include "maskhit/numcore/tensor.hpp"

namespace maskhit {

inline constexpr double kDefaultMinForeground = 0.25;
inline constexpr double kDefaultMaxOverlap = 0.5;

/// An n x n window of a slide, origin in patch units.
struct RegionSpec {
    std::string slide_id;
    std::uint32_t x0 = 0;
    std::uint32_t y0 = 0;
    std::uint32_t side = 0;
    friend bool operator==(const RegionSpec&, const RegionSpec&) = default;
};

/// Region features ready for the encoder. Cell j sits at grid position
/// (j % side, j / side) relative to the region origin.
struct RegionTensor {
    std::size_t side = 0;
    Tensor features;                      // side^2 x d
    std::vector<std::uint8_t> background; // side^2 flags
    std::vector<GridPos> positions;       // side^2 relative positions

    std::size_t cells() const noexcept { return side * side; }
    std::size_t foreground_count() const;
};

/// Foreground cells of the window (requires the window to lie inside the grid).
std::size_t region_foreground(const SlideRecord& slide, std::uint32_t x0, std::uint32_t y0, std::uint32_t side);

/// Every in-bounds origin whose window has at least `min_foreground` of its
/// side^2 cells in the foreground, in raster order.
std::vector<RegionSpec> valid_origins(const SlideRecord& slide, std::uint32_t side,
                                      double min_foreground = kDefaultMinForeground);

/// Uniform draw among valid origins. Throws NoValidRegion when there is none.
RegionSpec sample_region(const SlideRecord& slide, std::uint32_t side, Rng& rng,
                         double min_foreground = kDefaultMinForeground);

/// Intersection area of two equal-sized windows divided by side^2.
double region_overlap(const RegionSpec& a, const RegionSpec& b);

/// Up to `count` random regions with pairwise overlap <= max_overlap. When the
/// slide cannot host that many, accepted regions are repeated cyclically.
std::vector<RegionSpec> sample_region_set(const SlideRecord& slide, std::uint32_t side, std::size_t count,
                                          double max_overlap, Rng& rng,
                                          double min_foreground = kDefaultMinForeground);

/// Deterministic selection for evaluation: valid origins on a stride side/2
/// lattice, greedily filtered for overlap, thinned to `count` evenly spaced picks.
std::vector<RegionSpec> systematic_regions(const SlideRecord& slide, std::uint32_t side, std::size_t count,
                                           double max_overlap = kDefaultMaxOverlap,
                                           double min_foreground = kDefaultMinForeground);

RegionTensor gather_region(const SlideRecord& slide, std::uint32_t feature_dim, const RegionSpec& spec);
RegionTensor gather_region(const FeatureStore& store, const RegionSpec& spec);

/// Keeps a uniformly chosen `coverage` fraction of the foreground cells (at
/// least one); the rest are zeroed and flagged as background for this pass.
RegionTensor subsample_coverage(const RegionTensor& region, double coverage, Rng& rng);

/// Applies one of the eight grid symmetries (0 is the identity, 1..3 rotate by
/// quarter turns, 4..7 reflect then rotate) to the cells of a region.
RegionTensor transform_region(const RegionTensor& region, unsigned symmetry);

}  // namespace maskhit
