// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/featstore/store.hpp"

#include <cmath>
#include <cstring>
#include <unordered_set>

#include "maskhit/error.hpp"
#include "maskhit/numcore/binary_io.hpp"

namespace maskhit {

namespace {

constexpr std::string_view kMagic = "MHFS";

[[noreturn]] void invalid(const SlideRecord& s, const std::string& why) {
    throw DataError("slide '" + s.slide_id + "': " + why);
}

}  // namespace

void SlideRecord::finalize(std::uint32_t feature_dim) {
    if (slide_id.empty()) throw DataError("slide with empty id");
    if (grid_width == 0 || grid_height == 0) invalid(*this, "grid extents must be positive");
    if (grid_width > 65536 || grid_height > 65536) invalid(*this, "grid extents exceed u16 coordinates");
    if (foreground.size() != coords.size()) invalid(*this, "foreground flag count differs from patch count");
    if (features.size() != coords.size() * static_cast<std::size_t>(feature_dim)) {
        invalid(*this, "feature value count differs from patch count x d");
    }
    if (const auto* s = std::get_if<SurvivalLabel>(&label)) {
        if (!(s->time_years > 0.0) || !std::isfinite(s->time_years)) invalid(*this, "survival time must be positive");
        if (!std::isfinite(s->latent_log_hazard)) invalid(*this, "latent log hazard must be finite");
    }

    cell_index_.assign(static_cast<std::size_t>(grid_width) * grid_height, -1);
    std::size_t fg = 0;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const GridPos p = coords[i];
        if (p.x >= grid_width || p.y >= grid_height) {
            invalid(*this, "coordinate (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside grid");
        }
        std::int32_t& cell = cell_index_[static_cast<std::size_t>(p.y) * grid_width + p.x];
        if (cell >= 0) {
            invalid(*this, "duplicate coordinate (" + std::to_string(p.x) + "," + std::to_string(p.y) + ")");
        }
        cell = static_cast<std::int32_t>(i);
        const float* f = features.data() + i * feature_dim;
        if (foreground[i] > 1) invalid(*this, "foreground flag must be 0 or 1");
        if (foreground[i]) {
            ++fg;
            for (std::uint32_t j = 0; j < feature_dim; ++j) {
                if (!std::isfinite(f[j])) invalid(*this, "non-finite feature value");
            }
        } else {
            for (std::uint32_t j = 0; j < feature_dim; ++j) {
                if (f[j] != 0.0f) invalid(*this, "background patch carries a non-zero feature vector");
            }
        }
    }
    if (fg == 0) invalid(*this, "no foreground patch");
}

std::int32_t SlideRecord::patch_at(std::uint32_t x, std::uint32_t y) const {
    if (x >= grid_width || y >= grid_height) return -1;
    return cell_index_.at(static_cast<std::size_t>(y) * grid_width + x);
}

bool SlideRecord::is_foreground(std::uint32_t x, std::uint32_t y) const {
    const std::int32_t i = patch_at(x, y);
    return i >= 0 && foreground[static_cast<std::size_t>(i)] != 0;
}

std::size_t SlideRecord::foreground_count() const {
    std::size_t n = 0;
    for (std::uint8_t f : foreground) n += f ? 1 : 0;
    return n;
}

bool SlideRecord::same_content(const SlideRecord& o) const {
    if (slide_id != o.slide_id || grid_width != o.grid_width || grid_height != o.grid_height) return false;
    if (label.index() != o.label.index()) return false;
    if (const auto* s = std::get_if<SurvivalLabel>(&label)) {
        const auto& t = std::get<SurvivalLabel>(o.label);
        if (std::memcmp(&s->time_years, &t.time_years, sizeof(double)) != 0 || s->event != t.event ||
            std::memcmp(&s->latent_log_hazard, &t.latent_log_hazard, sizeof(double)) != 0) {
            return false;
        }
    } else if (std::get<ClassLabel>(label).id != std::get<ClassLabel>(o.label).id) {
        return false;
    }
    return coords == o.coords && foreground == o.foreground && features.size() == o.features.size() &&
           std::memcmp(features.data(), o.features.data(), features.size() * sizeof(float)) == 0;
}

FeatureStore::FeatureStore(std::uint32_t feature_dim, std::vector<SlideRecord> slides)
    : feature_dim_(feature_dim), slides_(std::move(slides)) {
    if (feature_dim_ == 0) throw DataError("feature dimension must be positive");
    std::unordered_set<std::string> seen;
    for (SlideRecord& s : slides_) {
        if (!seen.insert(s.slide_id).second) throw DataError("duplicate slide id '" + s.slide_id + "'");
        s.finalize(feature_dim_);
    }
}

std::optional<std::size_t> FeatureStore::find(std::string_view slide_id) const {
    for (std::size_t i = 0; i < slides_.size(); ++i) {
        if (slides_[i].slide_id == slide_id) return i;
    }
    return std::nullopt;
}

bool FeatureStore::operator==(const FeatureStore& other) const {
    if (feature_dim_ != other.feature_dim_ || slides_.size() != other.slides_.size()) return false;
    for (std::size_t i = 0; i < slides_.size(); ++i) {
        if (!slides_[i].same_content(other.slides_[i])) return false;
    }
    return true;
}

std::string encode_store(const FeatureStore& store) {
    ByteWriter w;
    w.bytes(kMagic);
    w.u32(kStoreVersion);
    w.u32(store.feature_dim());
    w.u32(static_cast<std::uint32_t>(store.size()));
    const std::size_t d = store.feature_dim();
    for (const SlideRecord& s : store.slides()) {
        w.str(s.slide_id);
        w.u32(s.grid_width);
        w.u32(s.grid_height);
        if (const auto* sl = std::get_if<SurvivalLabel>(&s.label)) {
            w.u8(0);
            w.f64(sl->time_years);
            w.f64(sl->latent_log_hazard);
            w.u8(sl->event ? 1 : 0);
        } else {
            w.u8(1);
            w.u32(std::get<ClassLabel>(s.label).id);
        }
        w.u32(static_cast<std::uint32_t>(s.patch_count()));
        for (std::size_t i = 0; i < s.patch_count(); ++i) {
            w.u16(s.coords[i].x);
            w.u16(s.coords[i].y);
            w.u8(s.foreground[i]);
            for (std::size_t j = 0; j < d; ++j) w.f32(s.features[i * d + j]);
        }
    }
    return w.take();
}

FeatureStore decode_store(std::string_view bytes) {
    ByteReader r(bytes, "feature store");
    if (r.bytes(kMagic.size()) != kMagic) throw DataError("bad feature store magic (expected MHFS)");
    const std::uint32_t version = r.u32();
    if (version != kStoreVersion) {
        throw DataError("feature store version mismatch: file " + std::to_string(version) + ", supported " +
                        std::to_string(kStoreVersion));
    }
    const std::uint32_t d = r.u32();
    const std::uint32_t count = r.u32();
    std::vector<SlideRecord> slides;
    for (std::uint32_t k = 0; k < count; ++k) {
        SlideRecord s;
        s.slide_id = r.str();
        s.grid_width = r.u32();
        s.grid_height = r.u32();
        const std::uint8_t tag = r.u8();
        if (tag == 0) {
            SurvivalLabel sl;
            sl.time_years = r.f64();
            sl.latent_log_hazard = r.f64();
            const std::uint8_t ev = r.u8();
            if (ev > 1) throw DataError("slide '" + s.slide_id + "': event flag must be 0 or 1");
            sl.event = ev == 1;
            s.label = sl;
        } else if (tag == 1) {
            s.label = ClassLabel{r.u32()};
        } else {
            throw DataError("slide '" + s.slide_id + "': unknown label tag " + std::to_string(tag));
        }
        const std::uint32_t patches = r.u32();
        const std::size_t per_patch = 5 + 4 * static_cast<std::size_t>(d);
        if (patches > r.remaining() / per_patch) {
            throw DataError("truncated feature store: slide '" + s.slide_id + "' patch records");
        }
        s.coords.resize(patches);
        s.foreground.resize(patches);
        s.features.resize(static_cast<std::size_t>(patches) * d);
        for (std::uint32_t i = 0; i < patches; ++i) {
            s.coords[i].x = r.u16();
            s.coords[i].y = r.u16();
            s.foreground[i] = r.u8();
            for (std::uint32_t j = 0; j < d; ++j) s.features[static_cast<std::size_t>(i) * d + j] = r.f32();
        }
        slides.push_back(std::move(s));
    }
    if (r.remaining() != 0) throw DataError("trailing bytes after feature store");
    return FeatureStore(d, std::move(slides));
}

void write_store(const FeatureStore& store, const std::string& path) { write_file_bytes(path, encode_store(store)); }

FeatureStore read_store(const std::string& path) { return decode_store(read_file_bytes(path)); }

}  // namespace maskhit
