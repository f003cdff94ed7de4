// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace maskhit {

struct SurvivalLabel {
    double time_years = 1.0;
    bool event = false;
    /// Generator-side log hazard; 0 for stores built from real data.
    double latent_log_hazard = 0.0;
};

struct ClassLabel {
    std::uint32_t id = 0;
};

using SlideLabel = std::variant<SurvivalLabel, ClassLabel>;

struct GridPos {
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    friend bool operator==(const GridPos&, const GridPos&) = default;
};

/// One preprocessed slide: patch grid coordinates, foreground flags and the
/// per-patch feature vectors (f32, as saved by the feature extractor).
/// Grid cells without a patch record count as background.
class SlideRecord {
public:
    std::string slide_id;
    std::uint32_t grid_width = 0;
    std::uint32_t grid_height = 0;
    SlideLabel label;
    std::vector<GridPos> coords;
    std::vector<std::uint8_t> foreground;
    /// coords.size() x feature_dim, row-major.
    std::vector<float> features;

    std::size_t patch_count() const noexcept { return coords.size(); }

    /// Checks every record invariant and builds the cell index. Throws DataError
    /// naming the violated invariant.
    void finalize(std::uint32_t feature_dim);

    /// Patch index at a grid cell, or -1 when no patch is recorded there.
    std::int32_t patch_at(std::uint32_t x, std::uint32_t y) const;
    bool is_foreground(std::uint32_t x, std::uint32_t y) const;
    std::size_t foreground_count() const;

    bool same_content(const SlideRecord& other) const;

private:
    std::vector<std::int32_t> cell_index_;
};

/// In-memory feature store. Immutable once constructed.
class FeatureStore {
public:
    FeatureStore() = default;
    FeatureStore(std::uint32_t feature_dim, std::vector<SlideRecord> slides);

    std::uint32_t feature_dim() const noexcept { return feature_dim_; }
    std::size_t size() const noexcept { return slides_.size(); }
    const std::vector<SlideRecord>& slides() const noexcept { return slides_; }
    const SlideRecord& slide(std::size_t i) const { return slides_.at(i); }
    std::optional<std::size_t> find(std::string_view slide_id) const;

    bool operator==(const FeatureStore& other) const;

private:
    std::uint32_t feature_dim_ = 0;
    std::vector<SlideRecord> slides_;
};

// Store file layout (little-endian):
//   "MHFS" | u32 version | u32 d | u32 slide count
//   per slide: u32 id length | UTF-8 id | u32 grid_width | u32 grid_height
//              u8 label tag (0 survival, 1 class)
//              survival: f64 time_years | f64 latent_log_hazard | u8 event
//              class:    u32 class id
//              u32 patch count
//              per patch: u16 x | u16 y | u8 foreground | d x f32
inline constexpr std::uint32_t kStoreVersion = 1;

std::string encode_store(const FeatureStore& store);
FeatureStore decode_store(std::string_view bytes);
void write_store(const FeatureStore& store, const std::string& path);
FeatureStore read_store(const std::string& path);

}  // namespace maskhit
