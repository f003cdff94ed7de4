// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "maskhit/error.hpp"
#include "maskhit/featstore/manifest.hpp"
#include "maskhit/featstore/sampling.hpp"
#include "maskhit/featstore/store.hpp"
#include "maskhit/featstore/synth.hpp"
#include "maskhit/metrics/metrics.hpp"

using namespace maskhit;

namespace {

SlideRecord tiny_slide(const std::string& id, std::uint32_t d) {
    SlideRecord s;
    s.slide_id = id;
    s.grid_width = 3;
    s.grid_height = 2;
    s.label = ClassLabel{1};
    s.coords = {{0, 0}, {1, 0}, {2, 1}};
    s.foreground = {1, 0, 1};
    s.features.assign(3 * d, 0.0f);
    for (std::uint32_t j = 0; j < d; ++j) {
        s.features[j] = 0.5f + static_cast<float>(j);
        s.features[2 * d + j] = -1.25f * static_cast<float>(j + 1);
    }
    return s;
}

SynthConfig small_synth(SynthTask task) {
    SynthConfig c;
    c.slide_count = 8;
    c.grid_width = 12;
    c.grid_height = 12;
    c.feature_dim = 8;
    c.task = task;
    return c;
}

}  // namespace

TEST_CASE("store encodes and decodes bit-exactly") {
    const FeatureStore store = synth_generate(small_synth(SynthTask::kSurvival), 3);
    const std::string bytes = encode_store(store);
    const FeatureStore back = decode_store(bytes);
    CHECK(back == store);
    CHECK(encode_store(back) == bytes);

    const auto path = (std::filesystem::temp_directory_path() / "maskhit_store_rt.mhfs").string();
    write_store(store, path);
    const FeatureStore disk = read_store(path);
    CHECK(encode_store(disk) == bytes);
    std::filesystem::remove(path);
}

TEST_CASE("store decoding rejects corruption") {
    FeatureStore store(4, {tiny_slide("s1", 4), tiny_slide("s2", 4)});
    const std::string bytes = encode_store(store);
    CHECK_THROWS_AS(decode_store(bytes.substr(0, bytes.size() - 3)), DataError);
    CHECK_THROWS_AS(decode_store(bytes + "x"), DataError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_store(bad_magic), DataError);

    std::string dup = bytes;
    const auto pos = dup.find("s2");
    REQUIRE(pos != std::string::npos);
    dup[pos + 1] = '1';
    CHECK_THROWS_WITH_AS(decode_store(dup), "duplicate slide id 's1'", DataError);
}

TEST_CASE("slide finalize names violated invariants") {
    auto fails = [](SlideRecord s) {
        try {
            s.finalize(4);
        } catch (const DataError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    SlideRecord ok = tiny_slide("a", 4);
    CHECK(fails(ok).empty());

    SlideRecord bg_feature = ok;
    bg_feature.features[4] = 1.0f;
    CHECK(fails(bg_feature).find("background patch") != std::string::npos);

    SlideRecord outside = ok;
    outside.coords[2] = {3, 0};
    CHECK(fails(outside).find("outside grid") != std::string::npos);

    SlideRecord dup = ok;
    dup.coords[1] = {0, 0};
    CHECK(fails(dup).find("duplicate coordinate") != std::string::npos);

    SlideRecord none = ok;
    none.foreground = {0, 0, 0};
    std::fill(none.features.begin(), none.features.end(), 0.0f);
    CHECK(fails(none).find("no foreground") != std::string::npos);

    SlideRecord nonfinite = ok;
    nonfinite.features[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK(fails(nonfinite).find("non-finite") != std::string::npos);

    SlideRecord bad_time = ok;
    bad_time.label = SurvivalLabel{0.0, true, 0.0};
    CHECK(fails(bad_time).find("survival time") != std::string::npos);
}

TEST_CASE("valid origins match brute force") {
    const FeatureStore store = synth_generate(small_synth(SynthTask::kSurvival), 5);
    for (const SlideRecord& s : store.slides()) {
        for (std::uint32_t side : {2u, 4u, 8u}) {
            for (double minfg : {0.0, 0.25, 0.75}) {
                std::vector<RegionSpec> brute;
                for (std::uint32_t y = 0; y + side <= s.grid_height; ++y) {
                    for (std::uint32_t x = 0; x + side <= s.grid_width; ++x) {
                        std::size_t fg = 0;
                        for (std::uint32_t yy = y; yy < y + side; ++yy) {
                            for (std::uint32_t xx = x; xx < x + side; ++xx) fg += s.is_foreground(xx, yy);
                        }
                        if (static_cast<double>(fg) >= minfg * side * side - 1e-9) brute.push_back({s.slide_id, x, y, side});
                    }
                }
                CHECK(valid_origins(s, side, minfg) == brute);
            }
        }
    }
    CHECK_THROWS_AS(valid_origins(store.slide(0), 13), NoValidRegion);
    CHECK_THROWS_AS(valid_origins(store.slide(0), 0), ConfigError);
}

TEST_CASE("region overlap is the shared area fraction") {
    CHECK(region_overlap({"a", 0, 0, 4}, {"a", 0, 0, 4}) == 1.0);
    CHECK(region_overlap({"a", 0, 0, 4}, {"a", 2, 0, 4}) == 0.5);
    CHECK(region_overlap({"a", 0, 0, 4}, {"a", 2, 2, 4}) == 0.25);
    CHECK(region_overlap({"a", 0, 0, 4}, {"a", 4, 0, 4}) == 0.0);
    CHECK_THROWS_AS(region_overlap({"a", 0, 0, 4}, {"a", 0, 0, 2}), ShapeError);
}

TEST_CASE("region sets respect the overlap bound") {
    const FeatureStore store = synth_generate(small_synth(SynthTask::kSurvival), 6);
    Rng rng(9);
    for (const SlideRecord& s : store.slides()) {
        const auto set = sample_region_set(s, 4, 5, 0.25, rng);
        REQUIRE(set.size() == 5);
        std::set<std::pair<std::uint32_t, std::uint32_t>> distinct;
        for (const auto& r : set) distinct.insert({r.x0, r.y0});
        std::vector<RegionSpec> uniq;
        for (const auto& r : set) {
            if (std::find(uniq.begin(), uniq.end(), r) == uniq.end()) uniq.push_back(r);
        }
        for (std::size_t i = 0; i < uniq.size(); ++i) {
            for (std::size_t j = i + 1; j < uniq.size(); ++j) CHECK(region_overlap(uniq[i], uniq[j]) <= 0.25 + 1e-12);
        }
        CHECK(region_foreground(s, set[0].x0, set[0].y0, 4) >= 4);
    }
}

TEST_CASE("systematic regions are deterministic and spread") {
    const FeatureStore store = synth_generate(small_synth(SynthTask::kSurvival), 7);
    const SlideRecord& s = store.slide(0);
    const auto a = systematic_regions(s, 4, 3);
    const auto b = systematic_regions(s, 4, 3);
    CHECK(a == b);
    CHECK(a.size() <= 3);
    CHECK(!a.empty());
    for (const auto& r : a) {
        CHECK(r.x0 % 2 == 0);
        CHECK(r.y0 % 2 == 0);
    }
    const auto all = systematic_regions(s, 4, 1000);
    CHECK(all.size() >= a.size());
}

TEST_CASE("gather region copies features and flags background") {
    FeatureStore store(4, {tiny_slide("s", 4)});
    const RegionTensor r = gather_region(store, {"s", 1, 0, 2});
    REQUIRE(r.cells() == 4);
    // cells (1,0) bg patch, (2,0) absent, (1,1) absent, (2,1) foreground
    CHECK(r.background == std::vector<std::uint8_t>{1, 1, 1, 0});
    CHECK(r.foreground_count() == 1);
    CHECK(r.features.at(3, 1) == doctest::Approx(-2.5));
    CHECK(r.features.at(0, 1) == 0.0);
    CHECK(r.positions[3] == GridPos{1, 1});
    CHECK_THROWS_AS(gather_region(store, {"s", 2, 0, 2}), DataError);
    CHECK_THROWS_AS(gather_region(store, {"nope", 0, 0, 2}), DataError);
}

TEST_CASE("coverage subsampling keeps the rounded fraction") {
    Rng rng(4);
    const FeatureStore store = synth_generate(small_synth(SynthTask::kSurvival), 8);
    const auto spec = systematic_regions(store.slide(0), 8, 1).front();
    const RegionTensor r = gather_region(store, spec);
    const std::size_t fg = r.foreground_count();
    for (double cov : {1.0, 0.75, 0.5, 0.1, 1e-6}) {
        const RegionTensor s = subsample_coverage(r, cov, rng);
        const std::size_t want = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cov * fg)));
        CHECK(s.foreground_count() == want);
        for (std::size_t i = 0; i < s.cells(); ++i) {
            if (!s.background[i]) {
                CHECK(r.background[i] == 0);
                for (std::size_t c = 0; c < s.features.cols(); ++c) CHECK(s.features.at(i, c) == r.features.at(i, c));
            }
        }
    }
    CHECK_THROWS_AS(subsample_coverage(r, 0.0, rng), ConfigError);
    CHECK_THROWS_AS(subsample_coverage(r, 1.5, rng), ConfigError);
}

TEST_CASE("region symmetries permute cells and keep adjacency") {
    const std::size_t n = 4;
    RegionTensor r;
    r.side = n;
    r.features = Tensor({n * n, 2});
    r.background.assign(n * n, 0);
    for (std::size_t i = 0; i < n * n; ++i) {
        r.features.at(i, 0) = static_cast<double>(i);
        r.features.at(i, 1) = -static_cast<double>(i);
        r.background[i] = i % 5 == 0;
        r.positions.push_back(GridPos{static_cast<std::uint16_t>(i % n), static_cast<std::uint16_t>(i / n)});
    }
    auto source = [&](const RegionTensor& t, std::size_t cell) { return static_cast<std::size_t>(t.features.at(cell, 0)); };
    std::set<std::vector<double>> layouts;
    for (unsigned k = 0; k < 8; ++k) {
        const RegionTensor t = transform_region(r, k);
        CHECK(t.positions.size() == r.positions.size());
        std::set<std::size_t> seen;
        for (std::size_t i = 0; i < n * n; ++i) {
            const std::size_t s = source(t, i);
            seen.insert(s);
            CHECK(t.background[i] == r.background[s]);
            CHECK(t.features.at(i, 1) == r.features.at(s, 1));
        }
        CHECK(seen.size() == n * n);
        // Grid neighbours stay neighbours.
        for (std::size_t i = 0; i < n * n; ++i) {
            if (i % n + 1 < n) {
                const std::size_t a = source(t, i), b = source(t, i + 1);
                const std::size_t dx = a % n > b % n ? a % n - b % n : b % n - a % n;
                const std::size_t dy = a / n > b / n ? a / n - b / n : b / n - a / n;
                CHECK(dx + dy == 1);
            }
        }
        layouts.insert(std::vector<double>(t.features.values().begin(), t.features.values().end()));
    }
    CHECK(layouts.size() == 8);
    CHECK(transform_region(transform_region(r, 1), 1).features == transform_region(r, 2).features);
    CHECK(transform_region(transform_region(r, 4), 4).features == r.features);
    CHECK(transform_region(r, 1).features.at(n - 1, 0) == 0.0);
    CHECK_THROWS_AS(transform_region(r, 8), ConfigError);
}

TEST_CASE("synthetic stores are deterministic and share prototypes") {
    const SynthConfig c = small_synth(SynthTask::kClassification);
    CHECK(encode_store(synth_generate(c, 11)) == encode_store(synth_generate(c, 11)));
    CHECK(encode_store(synth_generate(c, 11)) != encode_store(synth_generate(c, 12)));
    SynthConfig other = small_synth(SynthTask::kSurvival);
    CHECK(synth_prototypes(c) == synth_prototypes(other));
    other.prototype_seed = 99;
    CHECK(synth_prototypes(c) != synth_prototypes(other));
}

TEST_CASE("survival synth plants a hazard signal") {
    SynthConfig c = small_synth(SynthTask::kSurvival);
    c.slide_count = 120;
    const FeatureStore store = synth_generate(c, 21);
    std::vector<double> risk, time;
    std::vector<std::uint8_t> event;
    for (const auto& s : store.slides()) {
        const auto& l = std::get<SurvivalLabel>(s.label);
        risk.push_back(l.latent_log_hazard);
        time.push_back(l.time_years);
        event.push_back(l.event ? 1 : 0);
        CHECK(l.time_years > 0.0);
        CHECK(l.time_years <= c.censor_max_years);
    }
    CHECK(c_index(risk, time, event) > 0.6);
}

TEST_CASE("spatial pairs differ only in arrangement") {
    SynthConfig c = small_synth(SynthTask::kSpatialClassification);
    c.slide_count = 20;
    const SynthOutput out = synth_generate_detailed(c, 31);
    std::vector<double> score;
    std::vector<std::uint8_t> positive;
    for (std::size_t pair = 0; pair < c.slide_count / 2; ++pair) {
        const SlideRecord& s0 = out.store.slide(2 * pair);
        const SlideRecord& s1 = out.store.slide(2 * pair + 1);
        CHECK(std::get<ClassLabel>(s0.label).id == 0);
        CHECK(std::get<ClassLabel>(s1.label).id == 1);
        std::map<int, int> h0, h1;
        for (int p : out.patch_prototypes[2 * pair]) ++h0[p];
        for (int p : out.patch_prototypes[2 * pair + 1]) ++h1[p];
        CHECK(h0 == h1);

        // A touches B in class 1 only.
        auto touches = [&](std::size_t idx) {
            const SlideRecord& s = out.store.slide(idx);
            const auto& pp = out.patch_prototypes[idx];
            auto proto_at = [&](int x, int y) {
                if (x < 0 || y < 0 || x >= static_cast<int>(s.grid_width) || y >= static_cast<int>(s.grid_height)) return -1;
                const auto i = s.patch_at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
                return i < 0 ? -1 : pp[static_cast<std::size_t>(i)];
            };
            for (std::size_t i = 0; i < s.coords.size(); ++i) {
                if (pp[i] != static_cast<int>(kPrototypeA)) continue;
                const int x = s.coords[i].x, y = s.coords[i].y;
                for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                    if (proto_at(x + dx, y + dy) == static_cast<int>(kPrototypeB)) return true;
                }
            }
            return false;
        };
        CHECK_FALSE(touches(2 * pair));
        CHECK(touches(2 * pair + 1));
        for (std::size_t k = 0; k < 2; ++k) {
            score.push_back(static_cast<double>(h0[static_cast<int>(kPrototypeB)]));
            positive.push_back(static_cast<std::uint8_t>(k));
        }
    }
    CHECK(binary_auc(score, positive) == 0.5);
}

TEST_CASE("manifest round trips") {
    const FeatureStore store = synth_generate(small_synth(SynthTask::kSurvival), 2);
    std::vector<std::string> splits(store.size(), "unassigned");
    splits[0] = "fold0";
    const auto entries = manifest_for(store, splits);
    const auto back = decode_manifest(encode_manifest(entries));
    REQUIRE(back.size() == entries.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].slide_id == entries[i].slide_id);
        CHECK(back[i].split == entries[i].split);
        CHECK(format_label(back[i].label) == format_label(entries[i].label));
        const auto& a = std::get<SurvivalLabel>(back[i].label);
        const auto& b = std::get<SurvivalLabel>(store.slide(i).label);
        CHECK(a.time_years == b.time_years);
        CHECK(a.event == b.event);
    }
    CHECK(std::get<ClassLabel>(parse_label(format_label(ClassLabel{2}))).id == 2);
    CHECK_THROWS_AS(parse_label("bogus"), DataError);
    CHECK_THROWS_AS(manifest_for(store, {"x"}), DataError);
}

namespace {

// Slide on a w x h grid; fg(x, y) decides foreground, features are x + 0.01 y.
template <typename Fg>
SlideRecord grid_slide(const std::string& id, std::uint32_t w, std::uint32_t h, std::uint32_t d, Fg fg) {
    SlideRecord s;
    s.slide_id = id;
    s.grid_width = w;
    s.grid_height = h;
    s.label = ClassLabel{0};
    for (std::uint32_t y = 0; y < h; ++y) {
        for (std::uint32_t x = 0; x < w; ++x) {
            const bool f = fg(x, y);
            s.coords.push_back({static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y)});
            s.foreground.push_back(f ? 1 : 0);
            for (std::uint32_t j = 0; j < d; ++j) s.features.push_back(f ? static_cast<float>(x + 0.01 * y + j) : 0.0f);
        }
    }
    s.finalize(d);
    return s;
}

}  // namespace

TEST_CASE("store round-trip examples") {
    const FeatureStore empty(8, {});
    CHECK(decode_store(encode_store(empty)) == empty);
    SlideRecord one;
    one.slide_id = "one";
    one.grid_width = 2;
    one.grid_height = 2;
    one.label = SurvivalLabel{2.5, true, 0.0};
    one.coords = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    one.foreground = {1, 1, 1, 1};
    for (int i = 0; i < 32; ++i) one.features.push_back(0.125f * static_cast<float>(i));
    const FeatureStore single(8, {one});
    CHECK(decode_store(encode_store(single)) == single);
    SynthConfig c;
    c.slide_count = 100;
    c.grid_width = 6;
    c.grid_height = 6;
    c.feature_dim = 4;
    const std::string bytes = encode_store(synth_generate(c, 1));
    CHECK(encode_store(decode_store(bytes)) == bytes);
}

TEST_CASE("origin enumeration examples") {
    const SlideRecord full = grid_slide("f", 6, 5, 2, [](auto, auto) { return true; });
    CHECK(valid_origins(full, 3).size() == 4 * 3);
    const SlideRecord sparse = grid_slide("s", 10, 10, 2, [](auto x, auto y) { return x % 3 == 0 && y % 3 == 0 && x < 9 && y < 9 && (x + y) % 2 == 0; });
    CHECK(sparse.foreground_count() < 25);
    CHECK(valid_origins(sparse, 10).empty());
    Rng draw(1);
    CHECK_THROWS_AS(sample_region(sparse, 10, draw), NoValidRegion);

    const SlideRecord checker = grid_slide("c", 8, 8, 2, [](auto x, auto y) { return (x + y) % 2 == 0; });
    const auto origins = valid_origins(checker, 4);
    CHECK(origins.size() == 25);
    Rng rng(3);
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const RegionSpec r = sample_region(checker, 4, rng);
        ++counts[{r.x0, r.y0}];
    }
    CHECK(counts.size() == 25);
    const double expected = draws / 25.0;
    double chi2 = 0.0;
    for (const auto& [k, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
    CHECK(chi2 < 51.18);  // chi-square 0.999 quantile, 24 degrees of freedom
}

TEST_CASE("region set examples") {
    const SlideRecord full = grid_slide("f", 12, 12, 2, [](auto, auto) { return true; });
    Rng rng(4);
    CHECK(sample_region_set(full, 4, 1, 0.0, rng).size() == 1);
    CHECK(region_overlap({"f", 0, 0, 4}, {"f", 2, 0, 4}) <= 0.5);
    CHECK(region_overlap({"f", 0, 0, 4}, {"f", 1, 0, 4}) == 0.75);
    const SlideRecord exact = grid_slide("e", 4, 4, 2, [](auto, auto) { return true; });
    const auto four = sample_region_set(exact, 4, 4, 0.5, rng);
    REQUIRE(four.size() == 4);
    for (const auto& r : four) CHECK(r == RegionSpec{"e", 0, 0, 4});
}

TEST_CASE("region gathering examples") {
    const SlideRecord full = grid_slide("f", 5, 5, 3, [](auto, auto) { return true; });
    const RegionTensor all = gather_region(full, 3, {"f", 1, 1, 3});
    for (auto b : all.background) CHECK(b == 0);
    const RegionTensor first = gather_region(full, 3, {"f", 0, 0, 3});
    for (std::size_t j = 0; j < 3; ++j) CHECK(first.features.at(0, j) == static_cast<double>(full.features[j]));

    const SlideRecord margin = grid_slide("m", 6, 6, 2, [](auto x, auto y) { return x >= 2 && y >= 1; });
    const RegionTensor r = gather_region(margin, 2, {"m", 0, 0, 4});
    for (std::size_t j = 0; j < 16; ++j) {
        const std::uint32_t x = j % 4, y = j / 4;
        CHECK(static_cast<bool>(r.background[j]) == !margin.is_foreground(x, y));
    }
}

TEST_CASE("noise-free single-prototype synth reproduces the prototype") {
    SynthConfig c;
    c.slide_count = 3;
    c.grid_width = 6;
    c.grid_height = 6;
    c.feature_dim = 5;
    c.prototypes = 1;
    c.noise_sigma = 0.0;
    const auto proto = synth_prototypes(c).at(0);
    double norm = 0.0;
    for (double v : proto) norm += v * v;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));
    const FeatureStore store = synth_generate(c, 2);
    for (const auto& s : store.slides()) {
        for (std::size_t i = 0; i < s.patch_count(); ++i) {
            if (!s.foreground[i]) continue;
            for (std::size_t j = 0; j < 5; ++j) CHECK(s.features[i * 5 + j] == static_cast<float>(proto[j]));
        }
    }
}

TEST_CASE("adjacency counting separates the spatial classes perfectly") {
    SynthConfig c;
    c.task = SynthTask::kSpatialClassification;
    c.slide_count = 40;
    c.grid_width = 8;
    c.grid_height = 8;
    c.feature_dim = 4;
    const SynthOutput out = synth_generate_detailed(c, 5);
    std::vector<double> adjacency, histogram;
    std::vector<std::uint8_t> label;
    for (std::size_t i = 0; i < out.store.size(); ++i) {
        const SlideRecord& s = out.store.slide(i);
        const auto& pp = out.patch_prototypes[i];
        int touching = 0, b_count = 0;
        for (std::size_t p = 0; p < s.patch_count(); ++p) {
            if (pp[p] == static_cast<int>(kPrototypeB)) ++b_count;
            if (pp[p] != static_cast<int>(kPrototypeA)) continue;
            const int x = s.coords[p].x, y = s.coords[p].y;
            for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= 8 || ny >= 8) continue;
                const auto q = s.patch_at(static_cast<std::uint32_t>(nx), static_cast<std::uint32_t>(ny));
                if (q >= 0 && pp[static_cast<std::size_t>(q)] == static_cast<int>(kPrototypeB)) ++touching;
            }
        }
        adjacency.push_back(touching);
        histogram.push_back(b_count);
        label.push_back(static_cast<std::uint8_t>(std::get<ClassLabel>(s.label).id));
    }
    CHECK(binary_auc(adjacency, label) == 1.0);
    CHECK(binary_auc(histogram, label) <= 0.6);
}
