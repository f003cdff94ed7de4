// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maskhit/numcore/tensor.hpp"

namespace maskhit {

/// Named parameter tensors. std::map keeps iteration (and so serialization and
/// gradient reduction) order deterministic.
using ParamMap = std::map<std::string, Tensor>;

enum class OpTag {
    kConstant,
    kVariable,
    kParameter,
    kMatmul,
    kMatmulNT,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddBias,
    kLayerNorm,
    kGelu,
    kTanh,
    kSigmoid,
    kMaskedSoftmax,
    kSliceCols,
    kConcatCols,
    kConcatRows,
    kGatherRows,
    kReplaceRows,
    kSum,
    kMeanRows,
    kDropout,
    kRestorationLoss,
    kCoxLoss,
    kCrossEntropy,
};

const char* op_name(OpTag tag);

/// Handle to a node in a Graph.
struct Var {
    static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
    std::size_t id = kInvalid;
    bool valid() const noexcept { return id != kInvalid; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so every parent
/// index precedes its child and a reverse sweep is a valid topological order.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, std::size_t self)>;

    Var constant(Tensor value);
    /// Leaf that receives a gradient but is not a named parameter.
    Var variable(Tensor value);
    /// Leaf bound to caller-owned storage; repeated calls with one name reuse the node.
    /// The referenced tensor must outlive the graph.
    Var parameter(const std::string& name, const Tensor& value);

    Var add_node(OpTag tag, std::vector<std::size_t> parents, Tensor value, BackwardFn backward);

    const Tensor& value(Var v) const;
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    OpTag tag(Var v) const { return nodes_.at(v.id).tag; }
    const std::vector<std::size_t>& parents(Var v) const { return nodes_.at(v.id).parents; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Gradient accumulated at a node; zeros if nothing flowed there.
    Tensor grad(Var v) const;
    /// Mutable gradient buffer, allocated on first use. For op backward functions.
    Tensor& grad_buffer(std::size_t id);
    const Tensor& value(std::size_t id) const { return value(Var{id}); }

    /// Backpropagates from a scalar loss node.
    void backward(Var loss);
    /// Backpropagates from arbitrary seed gradients (shapes must match node values).
    void backward(std::span<const std::pair<Var, Tensor>> seeds);

    /// Gradients of every parameter leaf, keyed by parameter name.
    ParamMap parameter_grads() const;

private:
    struct Node {
        OpTag tag;
        std::vector<std::size_t> parents;
        Tensor value;
        const Tensor* external = nullptr;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    void run_backward(std::size_t from);

    std::vector<Node> nodes_;
    std::map<std::string, std::size_t> param_index_;
};

// Differentiable ops. Each validates shapes, evaluates eagerly and throws
// DivergenceError when its output is not finite.

Var matmul(Graph& g, Var a, Var b);
/// a * b^T
Var matmul_nt(Graph& g, Var a, Var b);
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double s);
/// x[r x c] + bias[c], bias broadcast over rows.
Var add_bias(Graph& g, Var x, Var bias);
Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps = 1e-5);
Var gelu(Graph& g, Var x);
Var tanh(Graph& g, Var x);
Var sigmoid(Graph& g, Var x);
/// Row softmax of logits + additive_mask. The mask is constant and either matches
/// the logits shape or holds one entry per column.
Var masked_softmax(Graph& g, Var logits, const Tensor& additive_mask);
Var slice_cols(Graph& g, Var x, std::size_t start, std::size_t width);
Var concat_cols(Graph& g, std::span<const Var> parts);
Var concat_rows(Graph& g, std::span<const Var> parts);
Var gather_rows(Graph& g, Var x, std::span<const std::size_t> rows);
/// Copy of x with the listed rows overwritten by token[cols].
Var replace_rows(Graph& g, Var x, std::span<const std::size_t> rows, Var token);
Var sum(Graph& g, Var x);
Var mean(Graph& g, Var x);
/// Column means, [r x c] -> [1 x c].
Var mean_rows(Graph& g, Var x);
/// Inverted dropout; identity when rate == 0.
Var dropout(Graph& g, Var x, double rate, Rng& rng);

// Plain tensor versions of the core ops.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor masked_softmax(const Tensor& logits, const Tensor& additive_mask);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Mask value for background keys.
inline constexpr double kBackgroundLogit = -1e5;

}  // namespace maskhit
