// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/featstore/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "maskhit/error.hpp"

namespace maskhit {

namespace {

bool enough_foreground(std::size_t fg, std::uint32_t side, double min_foreground) {
    const double cells = static_cast<double>(side) * side;
    return static_cast<double>(fg) >= min_foreground * cells - 1e-9;
}

void check_side(const SlideRecord& slide, std::uint32_t side) {
    if (side == 0) throw ConfigError("region side must be positive");
    if (slide.grid_width < side || slide.grid_height < side) {
        throw NoValidRegion("slide '" + slide.slide_id + "' grid " + std::to_string(slide.grid_width) + "x" +
                            std::to_string(slide.grid_height) + " smaller than region side " +
                            std::to_string(side));
    }
}

}  // namespace

std::size_t RegionTensor::foreground_count() const {
    return static_cast<std::size_t>(std::count(background.begin(), background.end(), std::uint8_t{0}));
}

std::size_t region_foreground(const SlideRecord& slide, std::uint32_t x0, std::uint32_t y0, std::uint32_t side) {
    std::size_t fg = 0;
    for (std::uint32_t y = y0; y < y0 + side; ++y) {
        for (std::uint32_t x = x0; x < x0 + side; ++x) fg += slide.is_foreground(x, y) ? 1 : 0;
    }
    return fg;
}

std::vector<RegionSpec> valid_origins(const SlideRecord& slide, std::uint32_t side, double min_foreground) {
    check_side(slide, side);
    const std::uint32_t w = slide.grid_width, h = slide.grid_height;
    // Summed-area table over foreground flags.
    std::vector<std::size_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    for (std::uint32_t y = 0; y < h; ++y) {
        for (std::uint32_t x = 0; x < w; ++x) {
            sat[(y + 1) * (w + 1) + x + 1] = (slide.is_foreground(x, y) ? 1 : 0) + sat[y * (w + 1) + x + 1] +
                                             sat[(y + 1) * (w + 1) + x] - sat[y * (w + 1) + x];
        }
    }
    std::vector<RegionSpec> out;
    for (std::uint32_t y0 = 0; y0 + side <= h; ++y0) {
        for (std::uint32_t x0 = 0; x0 + side <= w; ++x0) {
            const std::size_t fg = sat[(y0 + side) * (w + 1) + x0 + side] - sat[y0 * (w + 1) + x0 + side] -
                                   sat[(y0 + side) * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
            if (enough_foreground(fg, side, min_foreground)) out.push_back({slide.slide_id, x0, y0, side});
        }
    }
    return out;
}

RegionSpec sample_region(const SlideRecord& slide, std::uint32_t side, Rng& rng, double min_foreground) {
    std::vector<RegionSpec> origins = valid_origins(slide, side, min_foreground);
    if (origins.empty()) {
        throw NoValidRegion("slide '" + slide.slide_id + "' has no region of side " + std::to_string(side) +
                            " with enough foreground");
    }
    std::uniform_int_distribution<std::size_t> pick(0, origins.size() - 1);
    return origins[pick(rng)];
}

double region_overlap(const RegionSpec& a, const RegionSpec& b) {
    if (a.side != b.side || a.side == 0) throw ShapeError("region_overlap needs equal positive sides");
    auto span = [](std::uint32_t a0, std::uint32_t b0, std::uint32_t n) -> double {
        const std::int64_t lo = std::max<std::int64_t>(a0, b0);
        const std::int64_t hi = std::min<std::int64_t>(std::int64_t{a0} + n, std::int64_t{b0} + n);
        return static_cast<double>(std::max<std::int64_t>(0, hi - lo));
    };
    const double n = a.side;
    return span(a.x0, b.x0, a.side) * span(a.y0, b.y0, a.side) / (n * n);
}

namespace {

std::vector<RegionSpec> greedy_non_overlapping(const std::vector<RegionSpec>& candidates, std::size_t count,
                                               double max_overlap) {
    std::vector<RegionSpec> accepted;
    for (const RegionSpec& c : candidates) {
        if (accepted.size() == count) break;
        const bool ok = std::all_of(accepted.begin(), accepted.end(),
                                    [&](const RegionSpec& a) { return region_overlap(a, c) <= max_overlap + 1e-12; });
        if (ok) accepted.push_back(c);
    }
    return accepted;
}

}  // namespace

std::vector<RegionSpec> sample_region_set(const SlideRecord& slide, std::uint32_t side, std::size_t count,
                                          double max_overlap, Rng& rng, double min_foreground) {
    if (count == 0) throw ConfigError("region count must be at least 1");
    std::vector<RegionSpec> origins = valid_origins(slide, side, min_foreground);
    if (origins.empty()) {
        throw NoValidRegion("slide '" + slide.slide_id + "' has no region of side " + std::to_string(side) +
                            " with enough foreground");
    }
    std::shuffle(origins.begin(), origins.end(), rng);
    std::vector<RegionSpec> accepted = greedy_non_overlapping(origins, count, max_overlap);
    const std::size_t found = accepted.size();
    for (std::size_t i = found; i < count; ++i) accepted.push_back(accepted[i % found]);
    return accepted;
}

std::vector<RegionSpec> systematic_regions(const SlideRecord& slide, std::uint32_t side, std::size_t count,
                                           double max_overlap, double min_foreground) {
    if (count == 0) throw ConfigError("region count must be at least 1");
    const std::vector<RegionSpec> all = valid_origins(slide, side, min_foreground);
    if (all.empty()) {
        throw NoValidRegion("slide '" + slide.slide_id + "' has no region of side " + std::to_string(side) +
                            " with enough foreground");
    }
    const std::uint32_t stride = std::max<std::uint32_t>(1, side / 2);
    std::vector<RegionSpec> lattice;
    for (const RegionSpec& r : all) {
        if (r.x0 % stride == 0 && r.y0 % stride == 0) lattice.push_back(r);
    }
    if (lattice.empty()) lattice = all;
    std::vector<RegionSpec> accepted =
        greedy_non_overlapping(lattice, std::numeric_limits<std::size_t>::max(), max_overlap);
    if (accepted.size() <= count) return accepted;
    std::vector<RegionSpec> thinned;
    thinned.reserve(count);
    for (std::size_t i = 0; i < count; ++i) thinned.push_back(accepted[i * accepted.size() / count]);
    return thinned;
}

RegionTensor gather_region(const SlideRecord& slide, std::uint32_t feature_dim, const RegionSpec& spec) {
    if (spec.side == 0) throw ShapeError("region side must be positive");
    if (std::uint64_t{spec.x0} + spec.side > slide.grid_width ||
        std::uint64_t{spec.y0} + spec.side > slide.grid_height) {
        throw DataError("region (" + std::to_string(spec.x0) + "," + std::to_string(spec.y0) + ") side " +
                        std::to_string(spec.side) + " out of bounds for slide '" + slide.slide_id + "'");
    }
    const std::size_t n = spec.side, d = feature_dim;
    RegionTensor region;
    region.side = n;
    region.features = Tensor({n * n, d}, 0.0);
    region.background.assign(n * n, 1);
    region.positions.resize(n * n);
    for (std::size_t ry = 0; ry < n; ++ry) {
        for (std::size_t rx = 0; rx < n; ++rx) {
            const std::size_t cell = ry * n + rx;
            region.positions[cell] = GridPos{static_cast<std::uint16_t>(rx), static_cast<std::uint16_t>(ry)};
            const std::int32_t p = slide.patch_at(spec.x0 + static_cast<std::uint32_t>(rx),
                                                  spec.y0 + static_cast<std::uint32_t>(ry));
            if (p < 0 || !slide.foreground[static_cast<std::size_t>(p)]) continue;
            region.background[cell] = 0;
            const float* f = slide.features.data() + static_cast<std::size_t>(p) * d;
            double* dst = region.features.data() + cell * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<double>(f[j]);
        }
    }
    return region;
}

RegionTensor gather_region(const FeatureStore& store, const RegionSpec& spec) {
    const auto idx = store.find(spec.slide_id);
    if (!idx) throw DataError("unknown slide '" + spec.slide_id + "'");
    return gather_region(store.slide(*idx), store.feature_dim(), spec);
}

RegionTensor subsample_coverage(const RegionTensor& region, double coverage, Rng& rng) {
    if (!(coverage > 0.0) || coverage > 1.0) throw ConfigError("coverage fraction must lie in (0, 1]");
    if (coverage == 1.0) return region;
    std::vector<std::size_t> fg;
    for (std::size_t i = 0; i < region.cells(); ++i) {
        if (!region.background[i]) fg.push_back(i);
    }
    if (fg.empty()) return region;
    const std::size_t keep =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(coverage * static_cast<double>(fg.size()))));
    std::shuffle(fg.begin(), fg.end(), rng);
    RegionTensor out = region;
    const std::size_t d = out.features.cols();
    for (std::size_t i = keep; i < fg.size(); ++i) {
        out.background[fg[i]] = 1;
        std::fill_n(out.features.data() + fg[i] * d, d, 0.0);
    }
    return out;
}

RegionTensor transform_region(const RegionTensor& region, unsigned symmetry) {
    if (symmetry > 7) throw ConfigError("symmetry index must lie in [0, 7]");
    if (symmetry == 0) return region;
    const std::size_t n = region.side, d = region.features.cols();
    RegionTensor out = region;
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            std::size_t u = symmetry >= 4 ? n - 1 - x : x, v = y;
            for (unsigned q = 0; q < symmetry % 4; ++q) {
                const std::size_t t = u;
                u = n - 1 - v;
                v = t;
            }
            const std::size_t src = y * n + x, dst = v * n + u;
            out.background[dst] = region.background[src];
            std::copy_n(region.features.data() + src * d, d, out.features.data() + dst * d);
        }
    }
    return out;
}

}  // namespace maskhit
