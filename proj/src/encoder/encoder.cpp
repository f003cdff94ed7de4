// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/encoder/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "maskhit/error.hpp"

namespace maskhit {

void EncoderConfig::validate() const {
    if (layers < 1) throw ConfigError("encoder: layers must be >= 1");
    if (heads < 1) throw ConfigError("encoder: heads must be >= 1");
    if (dim == 0 || dim % 2 != 0) throw ConfigError("encoder: dim must be positive and even");
    if (dim % heads != 0) throw ConfigError("encoder: dim must be divisible by heads");
    if (region_side == 0) throw ConfigError("encoder: region_side must be positive");
    if (!(mlp_ratio > 0.0)) throw ConfigError("encoder: mlp_ratio must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("encoder: dropout must lie in [0, 1)");
}

std::size_t EncoderConfig::mlp_hidden() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(dim))));
}

EncoderConfig EncoderConfig::desk() { return EncoderConfig{2, 4, 64, 8, 4.0, 0.1}; }

EncoderConfig EncoderConfig::paper() { return EncoderConfig{12, 8, 512, 20, 4.0, 0.1}; }

std::string layer_param(std::size_t layer, const std::string& role) {
    return "encoder.layer" + std::to_string(layer) + "." + role;
}

namespace {

struct ParamShape {
    std::string name;
    Shape shape;
    enum Init { kWeight, kZero, kOne } init;
};

std::vector<ParamShape> encoder_layout(const EncoderConfig& c) {
    const std::size_t d = c.dim, hid = c.mlp_hidden(), half = d / 2, n = c.region_side;
    std::vector<ParamShape> out{
        {kPosX, {n, half}, ParamShape::kWeight},
        {kPosY, {n, half}, ParamShape::kWeight},
        {kClassToken, {1, d}, ParamShape::kWeight},
        {kMaskToken, {1, d}, ParamShape::kWeight},
        {"encoder.final_ln.gain", {d}, ParamShape::kOne},
        {"encoder.final_ln.bias", {d}, ParamShape::kZero},
    };
    for (std::size_t l = 0; l < c.layers; ++l) {
        const std::vector<ParamShape> layer{
            {layer_param(l, "ln1.gain"), {d}, ParamShape::kOne},
            {layer_param(l, "ln1.bias"), {d}, ParamShape::kZero},
            {layer_param(l, "attn.wq"), {d, d}, ParamShape::kWeight},
            {layer_param(l, "attn.bq"), {d}, ParamShape::kZero},
            {layer_param(l, "attn.wk"), {d, d}, ParamShape::kWeight},
            {layer_param(l, "attn.bk"), {d}, ParamShape::kZero},
            {layer_param(l, "attn.wv"), {d, d}, ParamShape::kWeight},
            {layer_param(l, "attn.bv"), {d}, ParamShape::kZero},
            {layer_param(l, "attn.wo"), {d, d}, ParamShape::kWeight},
            {layer_param(l, "attn.bo"), {d}, ParamShape::kZero},
            {layer_param(l, "ln2.gain"), {d}, ParamShape::kOne},
            {layer_param(l, "ln2.bias"), {d}, ParamShape::kZero},
            {layer_param(l, "mlp.w1"), {d, hid}, ParamShape::kWeight},
            {layer_param(l, "mlp.b1"), {hid}, ParamShape::kZero},
            {layer_param(l, "mlp.w2"), {hid, d}, ParamShape::kWeight},
            {layer_param(l, "mlp.b2"), {d}, ParamShape::kZero},
        };
        out.insert(out.end(), layer.begin(), layer.end());
    }
    return out;
}

}  // namespace

ParamMap init_encoder_params(const EncoderConfig& config, Rng& rng) {
    config.validate();
    ParamMap params;
    for (const ParamShape& p : encoder_layout(config)) {
        switch (p.init) {
            case ParamShape::kWeight: params.emplace(p.name, truncated_normal(p.shape, 0.02, rng)); break;
            case ParamShape::kZero: params.emplace(p.name, Tensor(p.shape, 0.0)); break;
            case ParamShape::kOne: params.emplace(p.name, Tensor(p.shape, 1.0)); break;
        }
    }
    return params;
}

void check_encoder_params(const ParamMap& params, const EncoderConfig& config) {
    config.validate();
    for (const ParamShape& p : encoder_layout(config)) {
        auto it = params.find(p.name);
        if (it == params.end()) throw ConfigError("checkpoint lacks encoder parameter '" + p.name + "'");
        if (it->second.shape() != p.shape) {
            throw ConfigError("encoder parameter '" + p.name + "' has shape " + shape_str(it->second.shape()) +
                              ", config expects " + shape_str(p.shape));
        }
    }
}

Tensor positional_encode(const RegionTensor& region, const Tensor& pos_x, const Tensor& pos_y) {
    const std::size_t d = region.features.cols(), half = d / 2;
    if (pos_x.cols() != half || pos_y.cols() != half || d % 2 != 0) {
        throw ShapeError("positional tables must have d/2 columns");
    }
    Tensor out = region.features;
    for (std::size_t j = 0; j < region.cells(); ++j) {
        const GridPos p = region.positions[j];
        if (p.x >= pos_x.rows() || p.y >= pos_y.rows()) {
            throw ShapeError("position (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                             ") outside positional table range");
        }
        double* row = out.data() + j * d;
        for (std::size_t k = 0; k < half; ++k) {
            row[k] += pos_x.at(p.x, k);
            row[half + k] += pos_y.at(p.y, k);
        }
    }
    return out;
}

Tensor attention_key_mask(std::span<const std::uint8_t> background) {
    Tensor mask({1 + background.size()}, 0.0);
    for (std::size_t j = 0; j < background.size(); ++j) {
        if (background[j]) mask[1 + j] = kBackgroundLogit;
    }
    return mask;
}

Var encoder_input(Graph& g, const ParamMap& params, const RegionTensor& region,
                  std::span<const std::size_t> masked_cells) {
    Var x = g.constant(region.features);
    if (!masked_cells.empty()) {
        for (std::size_t c : masked_cells) {
            if (c >= region.cells()) throw ShapeError("masked cell out of range");
            if (region.background[c]) throw DataError("mask plan references background cell " + std::to_string(c));
        }
        x = replace_rows(g, x, masked_cells, g.parameter(kMaskToken, params.at(kMaskToken)));
    }
    const Tensor& px = params.at(kPosX);
    const Tensor& py = params.at(kPosY);
    std::vector<std::size_t> xs(region.cells()), ys(region.cells());
    for (std::size_t j = 0; j < region.cells(); ++j) {
        xs[j] = region.positions[j].x;
        ys[j] = region.positions[j].y;
        if (xs[j] >= px.rows() || ys[j] >= py.rows()) throw ShapeError("position outside positional table range");
    }
    const Var parts[2] = {gather_rows(g, g.parameter(kPosX, px), xs), gather_rows(g, g.parameter(kPosY, py), ys)};
    return add(g, x, concat_cols(g, parts));
}

EncoderOutput encode(Graph& g, Var grid_input, std::span<const std::uint8_t> background,
                     const EncoderConfig& config, const ParamMap& params, const EncodeOptions& options) {
    config.validate();
    const Tensor& grid = g.value(grid_input);
    if (grid.rank() != 2 || grid.cols() != config.dim || grid.rows() != background.size()) {
        throw ShapeError("encode: input " + shape_str(grid.shape()) + " does not match config/background");
    }
    const bool drop = options.training && config.dropout > 0.0;
    if (drop && options.rng == nullptr) throw ShapeError("encode: training with dropout needs an rng");
    auto P = [&](const std::string& name) { return g.parameter(name, params.at(name)); };

    const Tensor key_mask = attention_key_mask(background);
    const Var seq_parts[2] = {P(kClassToken), grid_input};
    Var x = concat_rows(g, seq_parts);

    const std::size_t hd = config.head_dim();
    const double scale_qk = 1.0 / std::sqrt(static_cast<double>(hd));
    const std::size_t S = g.value(x).rows();
    EncoderOutput out;

    for (std::size_t l = 0; l < config.layers; ++l) {
        auto L = [&](const std::string& role) { return P(layer_param(l, role)); };
        Var h = layer_norm(g, x, L("ln1.gain"), L("ln1.bias"));
        Var q = add_bias(g, matmul(g, h, L("attn.wq")), L("attn.bq"));
        Var k = add_bias(g, matmul(g, h, L("attn.wk")), L("attn.bk"));
        Var v = add_bias(g, matmul(g, h, L("attn.wv")), L("attn.bv"));

        std::vector<Var> heads;
        Tensor attn;
        if (options.record_attention) attn = Tensor({config.heads, S, S});
        for (std::size_t hh = 0; hh < config.heads; ++hh) {
            Var qh = slice_cols(g, q, hh * hd, hd);
            Var kh = slice_cols(g, k, hh * hd, hd);
            Var vh = slice_cols(g, v, hh * hd, hd);
            Var weights = masked_softmax(g, scale(g, matmul_nt(g, qh, kh), scale_qk), key_mask);
            if (options.record_attention) {
                const Tensor& w = g.value(weights);
                std::copy(w.data(), w.data() + S * S, attn.data() + hh * S * S);
            }
            heads.push_back(matmul(g, weights, vh));
        }
        if (options.record_attention) out.attentions.push_back(std::move(attn));

        Var o = add_bias(g, matmul(g, concat_cols(g, heads), L("attn.wo")), L("attn.bo"));
        if (drop) o = dropout(g, o, config.dropout, *options.rng);
        x = add(g, x, o);

        Var h2 = layer_norm(g, x, L("ln2.gain"), L("ln2.bias"));
        Var m = gelu(g, add_bias(g, matmul(g, h2, L("mlp.w1")), L("mlp.b1")));
        m = add_bias(g, matmul(g, m, L("mlp.w2")), L("mlp.b2"));
        if (drop) m = dropout(g, m, config.dropout, *options.rng);
        x = add(g, x, m);
    }
    out.tokens = layer_norm(g, x, P("encoder.final_ln.gain"), P("encoder.final_ln.bias"));
    return out;
}

EncodedRegion encode_region(const RegionTensor& region, const EncoderConfig& config, const ParamMap& params) {
    Graph g;
    Var input = encoder_input(g, params, region);
    EncoderOutput out = encode(g, input, region.background, config, params);
    return EncodedRegion{g.value(out.tokens), std::move(out.attentions)};
}

}  // namespace maskhit
