// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/masking/mask.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "maskhit/error.hpp"

namespace maskhit {

namespace {

struct BlockShape {
    std::size_t w, h;
};

constexpr std::array<BlockShape, 8> kShapes{{{1, 1}, {1, 2}, {2, 1}, {2, 2}, {1, 3}, {3, 1}, {1, 4}, {4, 1}}};

}  // namespace

std::size_t mask_target_count(double p, std::size_t foreground) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("mask rate must lie in [0, 1]");
    // The epsilon absorbs representation error in p * F (0.4 * 400 and friends).
    const double raw = p * static_cast<double>(foreground);
    return std::min(foreground, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

MaskPlan blockwise_mask(const RegionTensor& region, double p, Rng& rng) {
    const std::size_t n = region.side;
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < region.cells(); ++i) {
        if (!region.background[i]) open.push_back(i);
    }
    const std::size_t target = mask_target_count(p, open.size());
    MaskPlan plan;
    plan.target_rate = p;
    if (target == 0) return plan;

    std::vector<std::uint8_t> masked(region.cells(), 0);
    std::uniform_int_distribution<std::size_t> pick_shape(0, kShapes.size() - 1);
    std::size_t count = 0;
    while (count < target) {
        // `open` holds the unmasked foreground cells.
        std::uniform_int_distribution<std::size_t> pick_anchor(0, open.size() - 1);
        const std::size_t anchor = open[pick_anchor(rng)];
        const BlockShape shape = kShapes[pick_shape(rng)];
        std::uniform_int_distribution<std::size_t> off_x(0, shape.w - 1), off_y(0, shape.h - 1);
        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(anchor % n) - static_cast<std::ptrdiff_t>(off_x(rng));
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(anchor / n) - static_cast<std::ptrdiff_t>(off_y(rng));

        // Candidate cells inside the rectangle that are unmasked foreground.
        std::vector<std::uint8_t> candidate(region.cells(), 0);
        for (std::ptrdiff_t y = oy; y < oy + static_cast<std::ptrdiff_t>(shape.h); ++y) {
            for (std::ptrdiff_t x = ox; x < ox + static_cast<std::ptrdiff_t>(shape.w); ++x) {
                if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(n) || y >= static_cast<std::ptrdiff_t>(n)) continue;
                const std::size_t c = static_cast<std::size_t>(y) * n + static_cast<std::size_t>(x);
                if (!region.background[c] && !masked[c]) candidate[c] = 1;
            }
        }
        // Keep the 4-connected component of the anchor so blocks stay contiguous.
        MaskBlock block;
        std::vector<std::size_t> stack{anchor};
        candidate[anchor] = 0;
        while (!stack.empty()) {
            const std::size_t c = stack.back();
            stack.pop_back();
            block.cells.push_back(c);
            const std::size_t x = c % n, y = c / n;
            const std::array<std::pair<bool, std::size_t>, 4> nbs{{{x > 0, c - 1},
                                                                  {x + 1 < n, c + 1},
                                                                  {y > 0, c - n},
                                                                  {y + 1 < n, c + n}}};
            for (auto [ok, nb] : nbs) {
                if (ok && candidate[nb]) {
                    candidate[nb] = 0;
                    stack.push_back(nb);
                }
            }
        }
        std::sort(block.cells.begin(), block.cells.end());
        for (std::size_t c : block.cells) masked[c] = 1;
        count += block.cells.size();
        plan.blocks.push_back(std::move(block));
        open.erase(std::remove_if(open.begin(), open.end(), [&](std::size_t c) { return masked[c] != 0; }),
                   open.end());
    }
    for (std::size_t i = 0; i < region.cells(); ++i) {
        if (masked[i]) plan.masked_positions.push_back(i);
    }
    return plan;
}

RegionTensor apply_mask(const RegionTensor& region, const MaskPlan& plan, std::span<const double> token) {
    const std::size_t d = region.features.cols();
    if (token.size() != d) throw ShapeError("mask token width must equal feature dimension");
    RegionTensor out = region;
    for (std::size_t c : plan.masked_positions) {
        if (c >= region.cells()) throw ShapeError("mask plan position out of range");
        if (region.background[c]) {
            throw DataError("mask plan references background cell " + std::to_string(c));
        }
        std::copy(token.begin(), token.end(), out.features.data() + c * d);
    }
    return out;
}

std::string format_mask_plan(const MaskPlan& plan) {
    std::ostringstream os;
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.17g", plan.target_rate);
    os << rate << '|';
    for (std::size_t b = 0; b < plan.blocks.size(); ++b) {
        if (b) os << ';';
        for (std::size_t i = 0; i < plan.blocks[b].cells.size(); ++i) {
            if (i) os << ',';
            os << plan.blocks[b].cells[i];
        }
    }
    return os.str();
}

MaskPlan parse_mask_plan(const std::string& text) {
    const auto bar = text.find('|');
    if (bar == std::string::npos) throw DataError("mask plan: missing '|'");
    MaskPlan plan;
    try {
        plan.target_rate = std::stod(text.substr(0, bar));
        std::istringstream blocks(text.substr(bar + 1));
        std::string block;
        while (std::getline(blocks, block, ';')) {
            if (block.empty()) continue;
            MaskBlock mb;
            std::istringstream cells(block);
            std::string cell;
            while (std::getline(cells, cell, ',')) mb.cells.push_back(std::stoul(cell));
            plan.masked_positions.insert(plan.masked_positions.end(), mb.cells.begin(), mb.cells.end());
            plan.blocks.push_back(std::move(mb));
        }
    } catch (const std::logic_error&) {
        throw DataError("mask plan: malformed number in '" + text + "'");
    }
    std::sort(plan.masked_positions.begin(), plan.masked_positions.end());
    return plan;
}

}  // namespace maskhit
