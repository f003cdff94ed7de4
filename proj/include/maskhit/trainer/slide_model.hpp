// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "maskhit/encoder/encoder.hpp"
#include "maskhit/featstore/sampling.hpp"
#include "maskhit/numcore/graph.hpp"

namespace maskhit {

enum class TaskKind { kSurvival, kClassification };
const char* task_kind_name(TaskKind task);
TaskKind parse_task_kind(const std::string& text);

enum class ModelKind { kMaskHIT, kMilAP, kMilAttn };
const char* model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct SlideModelSpec {
    ModelKind kind = ModelKind::kMaskHIT;
    TaskKind task = TaskKind::kSurvival;
    std::size_t outputs = 1;        // 1 risk score, or C logits
    std::size_t feature_dim = 64;
    EncoderConfig encoder;          // kMaskHIT only
    std::size_t attn_hidden = 32;   // kMilAttn only

    void validate() const;
};

inline const std::string kHeadWeight = "head.w";  // d x outputs
inline const std::string kHeadBias = "head.b";    // outputs

/// Parameters that belong to the transformer backend rather than the head.
bool is_backend_param(const std::string& name);

/// Head (and MIL pooling) parameters: truncated normal 0.02, zero biases.
ParamMap init_slide_head(const SlideModelSpec& spec, Rng& rng);
/// Full parameter set. The encoder part is copied from `pretrained_encoder`
/// when given (after a shape check), else freshly initialized.
ParamMap init_slide_model(const SlideModelSpec& spec, const ParamMap* pretrained_encoder, Rng& rng);

struct ForwardOptions {
    bool training = false;
    Rng* rng = nullptr;
};

/// Slide representation, 1 x d. MaskHIT averages the class-token outputs of
/// the regions; MIL-AP averages the foreground features of all regions;
/// MIL-Attn takes a gated-attention weighted mean of the same features.
Var slide_embedding(Graph& g, const SlideModelSpec& spec, const ParamMap& params,
                    std::span<const RegionTensor> regions, const ForwardOptions& options = {});

/// Linear head over slide_embedding, 1 x outputs.
Var slide_forward(Graph& g, const SlideModelSpec& spec, const ParamMap& params,
                  std::span<const RegionTensor> regions, const ForwardOptions& options = {});

}  // namespace maskhit
