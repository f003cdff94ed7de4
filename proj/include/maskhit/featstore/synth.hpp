// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskhit/featstore/store.hpp"

namespace maskhit {

enum class SynthTask { kSurvival, kClassification, kSpatialClassification };

const char* synth_task_name(SynthTask task);
SynthTask parse_synth_task(const std::string& name);

/// Synthetic slide generator settings.
///
/// Every foreground patch is one of `prototypes` unit-norm vectors plus
/// N(0, noise_sigma^2) per coordinate. Prototypes are laid out by Potts-style
/// region growing so neighbouring patches tend to share a prototype.
///
/// Tasks:
///  - survival: exponential event times with log hazard
///    hazard_scale * <w, prototype frequencies>, uniform censoring on
///    [0, censor_max_years];
///  - classification: the class sets the prototype mixture;
///  - spatial-classification: slides come in pairs sharing tissue, filler
///    layout and prototype histogram; the class-1 slide is a rotated or
///    mirrored copy so layouts are not shared verbatim. Three motif blobs P, Q, R of
///    `motif_size` cells are placed with P touching Q and R away from P.
///    Class 1 paints P=A, Q=B, R=decoy; class 0 paints P=A, Q=decoy, R=B, so
///    the label is "some A patch is 4-adjacent to a B patch".
struct SynthConfig {
    std::uint32_t slide_count = 64;
    std::uint32_t grid_width = 16;
    std::uint32_t grid_height = 16;
    std::uint32_t feature_dim = 64;
    std::uint32_t prototypes = 8;
    double noise_sigma = 0.1;
    SynthTask task = SynthTask::kSurvival;
    double tissue_fraction = 0.6;
    std::uint32_t potts_seeds = 6;
    std::uint32_t num_classes = 3;
    double class_purity = 0.5;
    std::uint32_t motif_size = 6;
    double hazard_scale = 3.0;
    double base_hazard = 0.2;
    double censor_max_years = 10.0;
    /// Seeds the prototype vectors and hazard weights, shared by every store
    /// generated with the same value.
    std::uint64_t prototype_seed = 1234;

    void validate() const;
};

inline constexpr std::uint32_t kPrototypeA = 0;
inline constexpr std::uint32_t kPrototypeB = 1;
inline constexpr std::uint32_t kPrototypeDecoy = 2;

struct SynthOutput {
    FeatureStore store;
    /// Per slide, per patch record: prototype index, or -1 for background.
    std::vector<std::vector<int>> patch_prototypes;
};

/// Row c holds prototype c (unit norm, before f32 rounding).
std::vector<std::vector<double>> synth_prototypes(const SynthConfig& config);
/// Unit-norm, zero-mean weights of the survival log hazard.
std::vector<double> synth_hazard_weights(const SynthConfig& config);

SynthOutput synth_generate_detailed(const SynthConfig& config, std::uint64_t seed);
FeatureStore synth_generate(const SynthConfig& config, std::uint64_t seed);

}  // namespace maskhit
