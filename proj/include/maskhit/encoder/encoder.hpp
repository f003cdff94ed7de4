// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "maskhit/featstore/sampling.hpp"
#include "maskhit/numcore/graph.hpp"

namespace maskhit {

struct EncoderConfig {
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t dim = 64;
    std::size_t region_side = 8;
    double mlp_ratio = 4.0;
    double dropout = 0.1;

    void validate() const;
    std::size_t head_dim() const { return dim / heads; }
    std::size_t mlp_hidden() const;
    std::size_t sequence_length() const { return 1 + region_side * region_side; }

    /// L=2, H=4, d=64, n=8.
    static EncoderConfig desk();
    /// L=12, H=8, d=512, n=20.
    static EncoderConfig paper();
};

// Parameter names. Per-layer names are "encoder.layer<l>.<role>".
inline const std::string kPosX = "encoder.pos_x";
inline const std::string kPosY = "encoder.pos_y";
inline const std::string kClassToken = "encoder.cls_token";
inline const std::string kMaskToken = "encoder.mask_token";
std::string layer_param(std::size_t layer, const std::string& role);

/// Truncated-normal (std 0.02) weights, tokens and positional tables; zero
/// biases; unit layer-norm gains.
ParamMap init_encoder_params(const EncoderConfig& config, Rng& rng);
/// Throws ConfigError when a parameter is missing or has the wrong shape.
void check_encoder_params(const ParamMap& params, const EncoderConfig& config);

/// features row j + concat(pos_x[x_j], pos_y[y_j]) for every cell.
Tensor positional_encode(const RegionTensor& region, const Tensor& pos_x, const Tensor& pos_y);

/// Additive attention mask over the sequence [class token, cells...].
Tensor attention_key_mask(std::span<const std::uint8_t> background);

struct EncodeOptions {
    bool training = false;
    Rng* rng = nullptr;  // required when training with dropout
    bool record_attention = true;
};

struct EncoderOutput {
    Var tokens;                       // (1 + n^2) x d; row 0 is the class token
    std::vector<Tensor> attentions;   // per layer, heads x S x S
};

/// Graph input for one region: mask-token substitution on `masked_cells`
/// followed by positional encoding, so gradients reach both tables and tokens.
Var encoder_input(Graph& g, const ParamMap& params, const RegionTensor& region,
                  std::span<const std::size_t> masked_cells = {});

/// Pre-norm transformer over the class token followed by the n^2 grid rows.
/// Background keys get an additive -1e5 on every attention logit.
EncoderOutput encode(Graph& g, Var grid_input, std::span<const std::uint8_t> background,
                     const EncoderConfig& config, const ParamMap& params, const EncodeOptions& options = {});

struct EncodedRegion {
    Tensor tokens;
    std::vector<Tensor> attentions;
};

/// Inference-mode forward pass of an unmasked region.
EncodedRegion encode_region(const RegionTensor& region, const EncoderConfig& config, const ParamMap& params);

}  // namespace maskhit
