// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "maskhit/attnviz/attnviz.hpp"
#include "maskhit/encoder/encoder.hpp"
#include "maskhit/featstore/synth.hpp"
#include "maskhit/trainer/finetune.hpp"
#include "maskhit/trainer/pretrain.hpp"

namespace maskhit {

struct AttnmapConfig {
    std::string slide;             // empty = first slide of the store
    std::size_t regions = 4;
    std::size_t query = 0;         // rollout row; 0 is the class token
    bool residual = false;
    RolloutOrder order = RolloutOrder::kLaterLeft;
    std::string compare_checkpoint;  // optional second checkpoint for a difference map
};

/// Resolved settings of one command. Files hold a JSON object whose sections
/// mirror these members; keys not listed here are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string preset = "desk";
    std::optional<std::string> task;  // survival | classification | spatial-classification
    std::string store;
    std::string out;
    std::string checkpoint;
    std::string model = "maskhit";  // maskhit | mil-ap | mil-attn
    std::size_t attn_hidden = 32;
    bool freeze_backend = false;

    SynthConfig synth;
    EncoderConfig encoder;
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    AttnmapConfig attnmap;

    /// Slide-level task implied by `task` (spatial-classification is a classification task).
    TaskKind task_kind() const;
    void validate() const;
};

/// "desk" or "paper" defaults.
RunConfig preset_config(const std::string& name);

/// Overlays a JSON document on `base`. Throws ConfigError naming the offending key.
RunConfig apply_config_text(RunConfig base, const std::string& json_text);

/// Complete JSON rendering; apply_config_text(preset, dump) reproduces the config.
std::string dump_run_config(const RunConfig& config);

}  // namespace maskhit
