// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/trainer/slide_model.hpp"

#include <vector>

#include "maskhit/error.hpp"

namespace maskhit {

const char* task_kind_name(TaskKind task) {
    return task == TaskKind::kSurvival ? "survival" : "classification";
}

TaskKind parse_task_kind(const std::string& text) {
    if (text == "survival") return TaskKind::kSurvival;
    if (text == "classification") return TaskKind::kClassification;
    throw ConfigError("task must be 'survival' or 'classification', got '" + text + "'");
}

const char* model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::kMaskHIT: return "maskhit";
        case ModelKind::kMilAP: return "mil-ap";
        case ModelKind::kMilAttn: return "mil-attn";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& text) {
    if (text == "maskhit") return ModelKind::kMaskHIT;
    if (text == "mil-ap" || text == "ap") return ModelKind::kMilAP;
    if (text == "mil-attn" || text == "attn") return ModelKind::kMilAttn;
    throw ConfigError("model must be 'maskhit', 'mil-ap' or 'mil-attn', got '" + text + "'");
}

void SlideModelSpec::validate() const {
    if (outputs == 0) throw ConfigError("model outputs must be >= 1");
    if (task == TaskKind::kSurvival && outputs != 1) throw ConfigError("survival models have exactly one output");
    if (task == TaskKind::kClassification && outputs < 2) throw ConfigError("classification needs >= 2 classes");
    if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
    if (kind == ModelKind::kMaskHIT) {
        encoder.validate();
        if (encoder.dim != feature_dim) {
            throw ConfigError("encoder dim " + std::to_string(encoder.dim) + " differs from feature dim " +
                              std::to_string(feature_dim));
        }
    }
    if (kind == ModelKind::kMilAttn && attn_hidden == 0) throw ConfigError("attn_hidden must be positive");
}

bool is_backend_param(const std::string& name) { return name.starts_with("encoder."); }

ParamMap init_slide_head(const SlideModelSpec& spec, Rng& rng) {
    spec.validate();
    const std::size_t d = spec.feature_dim;
    ParamMap p;
    if (spec.kind == ModelKind::kMilAttn) {
        const std::size_t h = spec.attn_hidden;
        p.emplace("mil.v.w", truncated_normal({d, h}, 0.02, rng));
        p.emplace("mil.v.b", Tensor({h}, 0.0));
        p.emplace("mil.u.w", truncated_normal({d, h}, 0.02, rng));
        p.emplace("mil.u.b", Tensor({h}, 0.0));
        p.emplace("mil.w", truncated_normal({1, h}, 0.02, rng));
    }
    p.emplace(kHeadWeight, truncated_normal({d, spec.outputs}, 0.02, rng));
    p.emplace(kHeadBias, Tensor({spec.outputs}, 0.0));
    return p;
}

ParamMap init_slide_model(const SlideModelSpec& spec, const ParamMap* pretrained_encoder, Rng& rng) {
    spec.validate();
    ParamMap params;
    if (spec.kind == ModelKind::kMaskHIT) {
        if (pretrained_encoder) {
            check_encoder_params(*pretrained_encoder, spec.encoder);
            for (const auto& [name, t] : *pretrained_encoder) {
                if (is_backend_param(name)) params.emplace(name, t);
            }
        } else {
            params = init_encoder_params(spec.encoder, rng);
        }
    }
    params.merge(init_slide_head(spec, rng));
    return params;
}

namespace {

// Foreground feature rows of all regions stacked into one constant matrix.
Tensor foreground_rows(std::span<const RegionTensor> regions, std::size_t d) {
    std::vector<double> values;
    std::size_t rows = 0;
    for (const RegionTensor& r : regions) {
        if (r.features.cols() != d) throw ShapeError("region feature width differs from model feature dim");
        for (std::size_t j = 0; j < r.cells(); ++j) {
            if (r.background[j]) continue;
            const auto row = r.features.row(j);
            values.insert(values.end(), row.begin(), row.end());
            ++rows;
        }
    }
    if (rows == 0) throw DataError("slide has no foreground patches in the sampled regions");
    return Tensor({rows, d}, std::move(values));
}

}  // namespace

Var slide_embedding(Graph& g, const SlideModelSpec& spec, const ParamMap& params,
                    std::span<const RegionTensor> regions, const ForwardOptions& options) {
    if (regions.empty()) throw DataError("slide forward needs at least one region");
    auto P = [&](const std::string& name) { return g.parameter(name, params.at(name)); };
    switch (spec.kind) {
        case ModelKind::kMaskHIT: {
            std::vector<Var> cls;
            const std::size_t zero = 0;
            for (const RegionTensor& r : regions) {
                Var input = encoder_input(g, params, r);
                EncodeOptions eo{options.training, options.rng, false};
                EncoderOutput out = encode(g, input, r.background, spec.encoder, params, eo);
                cls.push_back(gather_rows(g, out.tokens, std::span(&zero, 1)));
            }
            return cls.size() == 1 ? cls[0] : mean_rows(g, concat_rows(g, cls));
        }
        case ModelKind::kMilAP:
            return mean_rows(g, g.constant(foreground_rows(regions, spec.feature_dim)));
        case ModelKind::kMilAttn: {
            Var h = g.constant(foreground_rows(regions, spec.feature_dim));
            Var v = tanh(g, add_bias(g, matmul(g, h, P("mil.v.w")), P("mil.v.b")));
            Var u = sigmoid(g, add_bias(g, matmul(g, h, P("mil.u.w")), P("mil.u.b")));
            Var scores = matmul_nt(g, P("mil.w"), mul(g, v, u));  // 1 x F
            const Tensor no_mask({g.value(scores).cols()}, 0.0);
            return matmul(g, masked_softmax(g, scores, no_mask), h);
        }
    }
    throw ConfigError("unknown model kind");
}

Var slide_forward(Graph& g, const SlideModelSpec& spec, const ParamMap& params,
                  std::span<const RegionTensor> regions, const ForwardOptions& options) {
    Var emb = slide_embedding(g, spec, params, regions, options);
    return add_bias(g, matmul(g, emb, g.parameter(kHeadWeight, params.at(kHeadWeight))),
                    g.parameter(kHeadBias, params.at(kHeadBias)));
}

}  // namespace maskhit
