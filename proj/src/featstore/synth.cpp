// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/featstore/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>

#include "maskhit/error.hpp"
#include "maskhit/numcore/tensor.hpp"

namespace maskhit {

const char* synth_task_name(SynthTask task) {
    switch (task) {
        case SynthTask::kSurvival: return "survival";
        case SynthTask::kClassification: return "classification";
        case SynthTask::kSpatialClassification: return "spatial-classification";
    }
    return "unknown";
}

SynthTask parse_synth_task(const std::string& name) {
    if (name == "survival") return SynthTask::kSurvival;
    if (name == "classification") return SynthTask::kClassification;
    if (name == "spatial-classification") return SynthTask::kSpatialClassification;
    throw ConfigError("unknown synthetic task '" + name + "'");
}

void SynthConfig::validate() const {
    if (grid_width == 0 || grid_height == 0) throw ConfigError("synth: grid extents must be positive");
    if (grid_width > 4096 || grid_height > 4096) throw ConfigError("synth: grid extents too large");
    if (feature_dim == 0) throw ConfigError("synth: feature_dim must be positive");
    if (prototypes == 0) throw ConfigError("synth: prototypes must be positive");
    if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be >= 0");
    if (!(tissue_fraction > 0.0 && tissue_fraction <= 1.0)) throw ConfigError("synth: tissue_fraction must lie in (0, 1]");
    if (potts_seeds == 0) throw ConfigError("synth: potts_seeds must be positive");
    switch (task) {
        case SynthTask::kSurvival:
            if (!(base_hazard > 0.0) || !(censor_max_years > 0.0)) {
                throw ConfigError("synth: base_hazard and censor_max_years must be positive");
            }
            break;
        case SynthTask::kClassification:
            if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
            if (!(class_purity >= 0.0 && class_purity <= 1.0)) throw ConfigError("synth: class_purity must lie in [0, 1]");
            break;
        case SynthTask::kSpatialClassification:
            if (prototypes < 4) throw ConfigError("synth: spatial-classification needs at least 4 prototypes");
            if (slide_count % 2 != 0) throw ConfigError("synth: spatial-classification needs an even slide_count");
            if (motif_size == 0) throw ConfigError("synth: motif_size must be positive");
            if (4.0 * motif_size > tissue_fraction * grid_width * grid_height) {
                throw ConfigError("synth: motif blobs do not fit in the tissue area");
            }
            break;
    }
}

std::vector<std::vector<double>> synth_prototypes(const SynthConfig& config) {
    Rng rng(config.prototype_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> protos(config.prototypes, std::vector<double>(config.feature_dim));
    for (auto& p : protos) {
        double norm = 0.0;
        for (double& v : p) {
            v = normal(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : p) v /= norm;
    }
    return protos;
}

std::vector<double> synth_hazard_weights(const SynthConfig& config) {
    Rng rng(config.prototype_seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> w(config.prototypes);
    for (double& v : w) v = normal(rng);
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(w.size());
    double norm = 0.0;
    for (double& v : w) {
        v -= mean;
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& v : w) v /= norm;
    }
    return w;
}

namespace {

constexpr int kNotTissue = -2;
constexpr int kUnassigned = -1;

struct Grid {
    std::uint32_t w, h;
    std::size_t cells() const { return static_cast<std::size_t>(w) * h; }

    template <typename F>
    void for_neighbors(std::size_t c, F&& f) const {
        const std::uint32_t x = static_cast<std::uint32_t>(c % w), y = static_cast<std::uint32_t>(c / w);
        if (x > 0) f(c - 1);
        if (x + 1 < w) f(c + 1);
        if (y > 0) f(c - w);
        if (y + 1 < h) f(c + w);
    }
};

std::size_t pick_index(std::size_t n, Rng& rng) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(rng);
}

/// Random frontier growth of `size` cells starting at `start`, restricted to
/// cells where allowed(c) holds. Returns fewer cells when the area runs out.
template <typename Allowed>
std::vector<std::size_t> grow_blob(const Grid& grid, std::size_t start, std::size_t size, Allowed allowed, Rng& rng) {
    std::vector<std::uint8_t> state(grid.cells(), 0);  // 1 = in blob, 2 = in frontier
    std::vector<std::size_t> blob{start}, frontier;
    state[start] = 1;
    auto push_neighbors = [&](std::size_t c) {
        grid.for_neighbors(c, [&](std::size_t nb) {
            if (state[nb] == 0 && allowed(nb)) {
                state[nb] = 2;
                frontier.push_back(nb);
            }
        });
    };
    push_neighbors(start);
    while (blob.size() < size && !frontier.empty()) {
        const std::size_t i = pick_index(frontier.size(), rng);
        const std::size_t c = frontier[i];
        frontier[i] = frontier.back();
        frontier.pop_back();
        state[c] = 1;
        blob.push_back(c);
        push_neighbors(c);
    }
    return blob;
}

std::vector<int> grow_tissue(const Grid& grid, double fraction, Rng& rng) {
    const std::size_t target =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(grid.cells()))));
    const std::size_t center = static_cast<std::size_t>(grid.h / 2) * grid.w + grid.w / 2;
    std::vector<int> cells(grid.cells(), kNotTissue);
    for (std::size_t c : grow_blob(grid, center, target, [](std::size_t) { return true; }, rng)) cells[c] = kUnassigned;
    return cells;
}

/// Potts-style fill of every kUnassigned cell. Only cells flagged in
/// `propagates` spread their prototype to neighbours.
void potts_fill(const Grid& grid, std::vector<int>& proto, std::vector<std::uint8_t>& propagates,
                const std::vector<std::uint32_t>& allowed, const std::vector<double>& weights, std::uint32_t seeds,
                Rng& rng) {
    std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());
    std::vector<std::uint8_t> in_frontier(grid.cells(), 0);
    std::vector<std::size_t> frontier;
    std::vector<std::size_t> open;
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        if (proto[c] == kUnassigned) open.push_back(c);
    }
    auto assign = [&](std::size_t c, int p) {
        proto[c] = p;
        propagates[c] = 1;
        grid.for_neighbors(c, [&](std::size_t nb) {
            if (proto[nb] == kUnassigned && !in_frontier[nb]) {
                in_frontier[nb] = 1;
                frontier.push_back(nb);
            }
        });
    };
    auto seed_one = [&]() {
        // Lazily drop already-assigned cells from the open list.
        while (!open.empty()) {
            const std::size_t i = pick_index(open.size(), rng);
            const std::size_t c = open[i];
            open[i] = open.back();
            open.pop_back();
            if (proto[c] == kUnassigned) {
                assign(c, static_cast<int>(allowed[draw(rng)]));
                return true;
            }
        }
        return false;
    };
    for (std::uint32_t s = 0; s < seeds; ++s) {
        if (!seed_one()) return;
    }
    while (true) {
        if (frontier.empty()) {
            if (!seed_one()) return;
            continue;
        }
        const std::size_t i = pick_index(frontier.size(), rng);
        const std::size_t c = frontier[i];
        frontier[i] = frontier.back();
        frontier.pop_back();
        if (proto[c] != kUnassigned) continue;
        std::vector<int> sources;
        grid.for_neighbors(c, [&](std::size_t nb) {
            if (proto[nb] >= 0 && propagates[nb]) sources.push_back(proto[nb]);
        });
        if (sources.empty()) {
            // Reached only through a non-propagating cell; retry once a filler neighbour appears.
            in_frontier[c] = 0;
            continue;
        }
        assign(c, sources[pick_index(sources.size(), rng)]);
    }
}

SlideRecord make_record(const Grid& grid, const std::string& id, const std::vector<int>& proto,
                        const std::vector<std::vector<double>>& prototypes, const SynthConfig& config, Rng& rng,
                        std::vector<int>& patch_protos) {
    SlideRecord s;
    s.slide_id = id;
    s.grid_width = grid.w;
    s.grid_height = grid.h;
    const std::size_t d = config.feature_dim;
    std::normal_distribution<double> noise(0.0, 1.0);
    s.coords.reserve(grid.cells());
    s.foreground.reserve(grid.cells());
    s.features.assign(grid.cells() * d, 0.0f);
    patch_protos.assign(grid.cells(), -1);
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        s.coords.push_back(GridPos{static_cast<std::uint16_t>(c % grid.w), static_cast<std::uint16_t>(c / grid.w)});
        const bool fg = proto[c] >= 0;
        s.foreground.push_back(fg ? 1 : 0);
        if (!fg) continue;
        patch_protos[c] = proto[c];
        const auto& p = prototypes[static_cast<std::size_t>(proto[c])];
        for (std::size_t j = 0; j < d; ++j) {
            const double e = config.noise_sigma > 0.0 ? config.noise_sigma * noise(rng) : 0.0;
            s.features[c * d + j] = static_cast<float>(p[j] + e);
        }
    }
    return s;
}

std::string slide_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "slide_%04zu", i);
    return buf;
}

std::vector<int> mixture_layout(const Grid& grid, const SynthConfig& config, const std::vector<double>& weights,
                                Rng& rng) {
    std::vector<int> proto = grow_tissue(grid, config.tissue_fraction, rng);
    std::vector<std::uint8_t> propagates(grid.cells(), 0);
    std::vector<std::uint32_t> allowed(config.prototypes);
    for (std::uint32_t c = 0; c < config.prototypes; ++c) allowed[c] = c;
    potts_fill(grid, proto, propagates, allowed, weights, config.potts_seeds, rng);
    return proto;
}

struct MotifLayout {
    std::vector<int> filler;  // tissue filled except motif cells (kUnassigned there)
    std::vector<std::size_t> p, q, r;
};

/// Random non-identity rotation or reflection of a layout. Square grids use
/// the 7 non-trivial symmetries of the square, others the 3 that keep w x h.
/// Prototype counts and 4-adjacency are preserved.
std::vector<int> mirror_layout(const Grid& grid, const std::vector<int>& proto, Rng& rng) {
    const bool square = grid.w == grid.h;
    const std::size_t choice = 1 + pick_index(square ? 7 : 3, rng);
    const std::size_t k = square ? choice : std::array<std::size_t, 4>{0, 2, 4, 6}[choice];
    const std::uint32_t w = grid.w, h = grid.h;
    std::vector<int> out(proto.size());
    for (std::uint32_t y = 0; y < h; ++y) {
        for (std::uint32_t x = 0; x < w; ++x) {
            std::uint32_t nx = x, ny = y;
            switch (k) {
                case 1: nx = w - 1 - y; ny = x; break;          // quarter turn
                case 2: nx = w - 1 - x; ny = h - 1 - y; break;  // half turn
                case 3: nx = y; ny = h - 1 - x; break;          // three-quarter turn
                case 4: nx = w - 1 - x; break;                  // mirror x
                case 5: nx = y; ny = x; break;                  // transpose
                case 6: ny = h - 1 - y; break;                  // mirror y
                case 7: nx = w - 1 - y; ny = h - 1 - x; break;  // anti-transpose
                default: break;
            }
            out[static_cast<std::size_t>(ny) * w + nx] = proto[static_cast<std::size_t>(y) * w + x];
        }
    }
    return out;
}

MotifLayout spatial_layout(const Grid& grid, const SynthConfig& config, Rng& rng) {
    const std::size_t k = config.motif_size;
    for (int attempt = 0; attempt < 200; ++attempt) {
        std::vector<int> proto = grow_tissue(grid, config.tissue_fraction, rng);
        std::vector<std::size_t> tissue;
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            if (proto[c] == kUnassigned) tissue.push_back(c);
        }
        auto is_tissue = [&](std::size_t c) { return proto[c] != kNotTissue; };

        std::vector<std::uint8_t> mark(grid.cells(), 0);  // 1 = P, 2 = Q, 3 = R
        const std::size_t p_start = tissue[pick_index(tissue.size(), rng)];
        std::vector<std::size_t> p = grow_blob(grid, p_start, k, is_tissue, rng);
        if (p.size() < k) continue;
        for (std::size_t c : p) mark[c] = 1;

        std::vector<std::uint8_t> near_p(grid.cells(), 0);
        std::vector<std::size_t> q_starts;
        for (std::size_t c : p) {
            grid.for_neighbors(c, [&](std::size_t nb) {
                near_p[nb] = 1;
                if (mark[nb] == 0 && is_tissue(nb)) q_starts.push_back(nb);
            });
        }
        if (q_starts.empty()) continue;
        std::vector<std::size_t> q = grow_blob(
            grid, q_starts[pick_index(q_starts.size(), rng)], k,
            [&](std::size_t c) { return is_tissue(c) && mark[c] == 0; }, rng);
        if (q.size() < k) continue;
        for (std::size_t c : q) mark[c] = 2;

        auto r_allowed = [&](std::size_t c) { return is_tissue(c) && mark[c] == 0 && !near_p[c]; };
        std::vector<std::size_t> r_starts;
        for (std::size_t c : tissue) {
            if (r_allowed(c)) r_starts.push_back(c);
        }
        if (r_starts.empty()) continue;
        std::vector<std::size_t> r = grow_blob(grid, r_starts[pick_index(r_starts.size(), rng)], k, r_allowed, rng);
        if (r.size() < k) continue;
        for (std::size_t c : r) mark[c] = 3;

        // Motif cells are held out of the filler and do not spread into it.
        std::vector<std::uint8_t> propagates(grid.cells(), 0);
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            if (mark[c]) proto[c] = static_cast<int>(kPrototypeDecoy);
        }
        std::vector<std::uint32_t> allowed;
        for (std::uint32_t c = kPrototypeDecoy; c < config.prototypes; ++c) allowed.push_back(c);
        std::vector<double> weights(allowed.size(), 1.0);
        potts_fill(grid, proto, propagates, allowed, weights, config.potts_seeds, rng);
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            if (mark[c]) proto[c] = kUnassigned;
        }
        return MotifLayout{std::move(proto), std::move(p), std::move(q), std::move(r)};
    }
    throw ConfigError("synth: could not place the spatial motif; enlarge the grid or tissue_fraction");
}

}  // namespace

SynthOutput synth_generate_detailed(const SynthConfig& config, std::uint64_t seed) {
    config.validate();
    const Grid grid{config.grid_width, config.grid_height};
    const auto prototypes = synth_prototypes(config);
    const auto hazard_w = synth_hazard_weights(config);
    Rng rng(seed);

    std::vector<SlideRecord> slides;
    std::vector<std::vector<int>> patch_protos;
    slides.reserve(config.slide_count);

    auto emit = [&](const std::vector<int>& proto, SlideLabel label) {
        std::vector<int> pp;
        SlideRecord s = make_record(grid, slide_name(slides.size()), proto, prototypes, config, rng, pp);
        s.label = label;
        slides.push_back(std::move(s));
        patch_protos.push_back(std::move(pp));
    };

    switch (config.task) {
        case SynthTask::kSurvival: {
            std::gamma_distribution<double> gamma(0.5, 1.0);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            for (std::uint32_t i = 0; i < config.slide_count; ++i) {
                std::vector<double> weights(config.prototypes);
                for (double& w : weights) w = gamma(rng) + 1e-6;
                const std::vector<int> proto = mixture_layout(grid, config, weights, rng);
                std::vector<double> freq(config.prototypes, 0.0);
                double fg = 0.0;
                for (int p : proto) {
                    if (p >= 0) {
                        freq[static_cast<std::size_t>(p)] += 1.0;
                        fg += 1.0;
                    }
                }
                double lh = 0.0;
                for (std::size_t c = 0; c < freq.size(); ++c) lh += hazard_w[c] * freq[c] / fg;
                lh *= config.hazard_scale;
                const double rate = config.base_hazard * std::exp(lh);
                std::exponential_distribution<double> event_time(rate);
                double t = event_time(rng);
                if (!(t > 0.0)) t = std::numeric_limits<double>::min();
                const double censor = config.censor_max_years * (1.0 - unit(rng));  // (0, max]
                SurvivalLabel label;
                label.event = t <= censor;
                label.time_years = std::min(t, censor);
                label.latent_log_hazard = lh;
                emit(proto, label);
            }
            break;
        }
        case SynthTask::kClassification: {
            std::uniform_int_distribution<std::uint32_t> pick_class(0, config.num_classes - 1);
            for (std::uint32_t i = 0; i < config.slide_count; ++i) {
                const std::uint32_t cls = pick_class(rng);
                const double rest = (1.0 - config.class_purity) / config.prototypes;
                std::vector<double> weights(config.prototypes, rest);
                weights[cls % config.prototypes] += config.class_purity;
                emit(mixture_layout(grid, config, weights, rng), ClassLabel{cls});
            }
            break;
        }
        case SynthTask::kSpatialClassification: {
            for (std::uint32_t pair = 0; pair < config.slide_count / 2; ++pair) {
                const MotifLayout layout = spatial_layout(grid, config, rng);
                for (std::uint32_t cls = 0; cls < 2; ++cls) {
                    std::vector<int> proto = layout.filler;
                    const int q_proto = static_cast<int>(cls == 1 ? kPrototypeB : kPrototypeDecoy);
                    const int r_proto = static_cast<int>(cls == 1 ? kPrototypeDecoy : kPrototypeB);
                    for (std::size_t c : layout.p) proto[c] = static_cast<int>(kPrototypeA);
                    for (std::size_t c : layout.q) proto[c] = q_proto;
                    for (std::size_t c : layout.r) proto[c] = r_proto;
                    if (cls == 1) proto = mirror_layout(grid, proto, rng);
                    emit(proto, ClassLabel{cls});
                }
            }
            break;
        }
    }
    return SynthOutput{FeatureStore(config.feature_dim, std::move(slides)), std::move(patch_protos)};
}

FeatureStore synth_generate(const SynthConfig& config, std::uint64_t seed) {
    return synth_generate_detailed(config, seed).store;
}

}  // namespace maskhit
