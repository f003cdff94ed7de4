// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/numcore/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "maskhit/error.hpp"

namespace maskhit {

const char* op_name(OpTag tag) {
    switch (tag) {
        case OpTag::kConstant: return "constant";
        case OpTag::kVariable: return "variable";
        case OpTag::kParameter: return "parameter";
        case OpTag::kMatmul: return "matmul";
        case OpTag::kMatmulNT: return "matmul_nt";
        case OpTag::kAdd: return "add";
        case OpTag::kSub: return "sub";
        case OpTag::kMul: return "mul";
        case OpTag::kScale: return "scale";
        case OpTag::kAddBias: return "add_bias";
        case OpTag::kLayerNorm: return "layer_norm";
        case OpTag::kGelu: return "gelu";
        case OpTag::kTanh: return "tanh";
        case OpTag::kSigmoid: return "sigmoid";
        case OpTag::kMaskedSoftmax: return "masked_softmax";
        case OpTag::kSliceCols: return "slice_cols";
        case OpTag::kConcatCols: return "concat_cols";
        case OpTag::kConcatRows: return "concat_rows";
        case OpTag::kGatherRows: return "gather_rows";
        case OpTag::kReplaceRows: return "replace_rows";
        case OpTag::kSum: return "sum";
        case OpTag::kMeanRows: return "mean_rows";
        case OpTag::kDropout: return "dropout";
        case OpTag::kRestorationLoss: return "restoration_loss";
        case OpTag::kCoxLoss: return "cox_loss";
        case OpTag::kCrossEntropy: return "cross_entropy";
    }
    return "unknown";
}

Var Graph::constant(Tensor value) {
    return add_node(OpTag::kConstant, {}, std::move(value), nullptr);
}

Var Graph::variable(Tensor value) {
    Var v = add_node(OpTag::kVariable, {}, std::move(value), nullptr);
    nodes_[v.id].requires_grad = true;
    return v;
}

Var Graph::parameter(const std::string& name, const Tensor& value) {
    if (auto it = param_index_.find(name); it != param_index_.end()) {
        if (nodes_[it->second].external != &value) {
            throw ShapeError("parameter '" + name + "' bound to two different tensors");
        }
        return Var{it->second};
    }
    if (!value.all_finite()) throw DivergenceError("parameter '" + name + "' is not finite");
    Node node{OpTag::kParameter, {}, Tensor{}, &value, Tensor{}, true, nullptr};
    nodes_.push_back(std::move(node));
    param_index_.emplace(name, nodes_.size() - 1);
    return Var{nodes_.size() - 1};
}

Var Graph::add_node(OpTag tag, std::vector<std::size_t> parents, Tensor value, BackwardFn backward) {
    if (!value.all_finite()) {
        throw DivergenceError(std::string("non-finite output from op '") + op_name(tag) + "'");
    }
    bool needs = false;
    for (std::size_t p : parents) {
        if (p >= nodes_.size()) throw ShapeError("graph parent index out of range");
        needs = needs || nodes_[p].requires_grad;
    }
    Node node{tag, std::move(parents), std::move(value), nullptr, Tensor{}, needs,
              needs ? std::move(backward) : BackwardFn{}};
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.external ? *n.external : n.value;
}

Tensor Graph::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (!n.grad.empty()) return n.grad;
    return Tensor(value(v).shape(), 0.0);
}

Tensor& Graph::grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad = Tensor((n.external ? *n.external : n.value).shape(), 0.0);
    return n.grad;
}

void Graph::backward(Var loss) {
    if (value(loss).size() != 1) {
        throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(value(loss).shape()));
    }
    const std::pair<Var, Tensor> seed{loss, Tensor(value(loss).shape(), 1.0)};
    backward(std::span(&seed, 1));
}

void Graph::backward(std::span<const std::pair<Var, Tensor>> seeds) {
    std::size_t top = 0;
    for (const auto& [var, seed] : seeds) {
        if (seed.shape() != value(var).shape()) {
            throw ShapeError("seed gradient shape " + shape_str(seed.shape()) + " does not match node " +
                             shape_str(value(var).shape()));
        }
        if (!seed.all_finite()) throw DivergenceError("non-finite seed gradient");
        Tensor& buf = grad_buffer(var.id);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += seed[i];
        top = std::max(top, var.id + 1);
    }
    for (auto& [name, id] : param_index_) grad_buffer(id);
    run_backward(top);
}

void Graph::run_backward(std::size_t from) {
    for (std::size_t id = from; id-- > 0;) {
        Node& n = nodes_[id];
        for (std::size_t p : n.parents) {
            if (p >= id) throw ShapeError("cycle in gradient graph at node " + std::to_string(id));
        }
        if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
        n.backward(*this, id);
    }
    for (const Node& n : nodes_) {
        if (n.requires_grad && !n.grad.empty() && !n.grad.all_finite()) {
            throw DivergenceError(std::string("non-finite gradient at op '") + op_name(n.tag) + "'");
        }
    }
}

ParamMap Graph::parameter_grads() const {
    ParamMap out;
    for (const auto& [name, id] : param_index_) out.emplace(name, grad(Var{id}));
    return out;
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void require_rank2(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(what) + " expects a matrix, got " + shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

void accumulate(Tensor& dst, const Tensor& src, double s = 1.0) {
    double* d = dst.data();
    const double* x = src.data();
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s * x[i];
}

Var elementwise_binary(Graph& g, OpTag tag, Var a, Var b) {
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    require_same_shape(av, bv, op_name(tag));
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        switch (tag) {
            case OpTag::kAdd: out[i] = av[i] + bv[i]; break;
            case OpTag::kSub: out[i] = av[i] - bv[i]; break;
            default: out[i] = av[i] * bv[i]; break;
        }
    }
    return g.add_node(tag, {a.id, b.id}, std::move(out), [tag, a, b](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        if (gr.requires_grad(a)) {
            Tensor& ga = gr.grad_buffer(a.id);
            if (tag == OpTag::kMul) {
                const Tensor& bv2 = gr.value(b);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * bv2[i];
            } else {
                accumulate(ga, gout);
            }
        }
        if (gr.requires_grad(b)) {
            Tensor& gb = gr.grad_buffer(b.id);
            if (tag == OpTag::kMul) {
                const Tensor& av2 = gr.value(a);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i] * av2[i];
            } else {
                accumulate(gb, gout, tag == OpTag::kSub ? -1.0 : 1.0);
            }
        }
    });
}

template <typename F, typename D>
Var elementwise_unary(Graph& g, OpTag tag, Var x, F f, D dfdx_from_xy) {
    const Tensor& xv = g.value(x);
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
    return g.add_node(tag, {x.id}, std::move(out), [x, dfdx_from_xy](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        const Tensor& xv2 = gr.value(x);
        const Tensor& yv = gr.value(self);
        Tensor& gx = gr.grad_buffer(x.id);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i] * dfdx_from_xy(xv2[i], yv[i]);
    });
}

void check_mask_shape(const Tensor& logits, const Tensor& mask) {
    if (mask.shape() == logits.shape()) return;
    if (mask.size() == logits.cols()) return;
    throw ShapeError("masked_softmax: mask shape " + shape_str(mask.shape()) +
                     " incompatible with logits " + shape_str(logits.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner extents differ " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    Tensor out({a.dim(0), b.dim(1)});
    gemm_nn(a.data(), b.data(), out.data(), a.dim(0), a.dim(1), b.dim(1), false);
    return out;
}

Var matmul(Graph& g, Var a, Var b) {
    Tensor out = matmul(g.value(a), g.value(b));
    return g.add_node(OpTag::kMatmul, {a.id, b.id}, std::move(out), [a, b](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        const Tensor& av = gr.value(a);
        const Tensor& bv = gr.value(b);
        const std::size_t m = av.dim(0), k = av.dim(1), p = bv.dim(1);
        if (gr.requires_grad(a)) gemm_nt(gout.data(), bv.data(), gr.grad_buffer(a.id).data(), m, p, k, true);
        if (gr.requires_grad(b)) gemm_tn(av.data(), gout.data(), gr.grad_buffer(b.id).data(), m, k, p, true);
    });
}

Var matmul_nt(Graph& g, Var a, Var b) {
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    require_rank2(av, "matmul_nt");
    require_rank2(bv, "matmul_nt");
    if (av.dim(1) != bv.dim(1)) {
        throw ShapeError("matmul_nt: inner extents differ " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()) + "^T");
    }
    Tensor out({av.dim(0), bv.dim(0)});
    gemm_nt(av.data(), bv.data(), out.data(), av.dim(0), av.dim(1), bv.dim(0), false);
    return g.add_node(OpTag::kMatmulNT, {a.id, b.id}, std::move(out), [a, b](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        const Tensor& av2 = gr.value(a);
        const Tensor& bv2 = gr.value(b);
        const std::size_t m = av2.dim(0), k = av2.dim(1), p = bv2.dim(0);
        if (gr.requires_grad(a)) gemm_nn(gout.data(), bv2.data(), gr.grad_buffer(a.id).data(), m, p, k, true);
        if (gr.requires_grad(b)) gemm_tn(gout.data(), av2.data(), gr.grad_buffer(b.id).data(), m, p, k, true);
    });
}

Var add(Graph& g, Var a, Var b) { return elementwise_binary(g, OpTag::kAdd, a, b); }
Var sub(Graph& g, Var a, Var b) { return elementwise_binary(g, OpTag::kSub, a, b); }
Var mul(Graph& g, Var a, Var b) { return elementwise_binary(g, OpTag::kMul, a, b); }

Var scale(Graph& g, Var a, double s) {
    const Tensor& av = g.value(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
    return g.add_node(OpTag::kScale, {a.id}, std::move(out), [a, s](Graph& gr, std::size_t self) {
        accumulate(gr.grad_buffer(a.id), gr.grad_buffer(self), s);
    });
}

Var add_bias(Graph& g, Var x, Var bias) {
    const Tensor& xv = g.value(x);
    const Tensor& bv = g.value(bias);
    if (bv.size() != xv.cols()) {
        throw ShapeError("add_bias: bias " + shape_str(bv.shape()) + " vs input " + shape_str(xv.shape()));
    }
    Tensor out = xv;
    const std::size_t c = xv.cols();
    for (std::size_t r = 0; r < xv.rows(); ++r) {
        for (std::size_t j = 0; j < c; ++j) out[r * c + j] += bv[j];
    }
    return g.add_node(OpTag::kAddBias, {x.id, bias.id}, std::move(out), [x, bias](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        if (gr.requires_grad(x)) accumulate(gr.grad_buffer(x.id), gout);
        if (gr.requires_grad(bias)) {
            Tensor& gb = gr.grad_buffer(bias.id);
            const std::size_t cols = gb.size();
            for (std::size_t r = 0; r < gout.size() / cols; ++r) {
                for (std::size_t j = 0; j < cols; ++j) gb[j] += gout[r * cols + j];
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::size_t d = x.cols();
    if (d == 0) throw ShapeError("layer_norm: zero feature dimension");
    if (gain.size() != d || bias.size() != d) throw ShapeError("layer_norm: gain/bias size must equal d");
    if (!(eps > 0.0)) throw ShapeError("layer_norm: eps must be positive");
    Tensor out(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* xr = x.data() + r * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(d);
        const double rstd = 1.0 / std::sqrt(var + eps);
        double* orow = out.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) orow[j] = (xr[j] - mu) * rstd * gain[j] + bias[j];
    }
    return out;
}

Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps) {
    Tensor out = layer_norm(g.value(x), g.value(gain), g.value(bias), eps);
    return g.add_node(OpTag::kLayerNorm, {x.id, gain.id, bias.id}, std::move(out),
                      [x, gain, bias, eps](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        const Tensor& xv = gr.value(x);
        const Tensor& gv = gr.value(gain);
        const std::size_t d = xv.cols();
        const double inv_d = 1.0 / static_cast<double>(d);
        std::vector<double> xhat(d), gxhat(d);
        for (std::size_t r = 0; r < xv.rows(); ++r) {
            const double* xr = xv.data() + r * d;
            const double* gr_row = gout.data() + r * d;
            double mu = 0.0;
            for (std::size_t j = 0; j < d; ++j) mu += xr[j];
            mu *= inv_d;
            double var = 0.0;
            for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
            var *= inv_d;
            const double rstd = 1.0 / std::sqrt(var + eps);
            double mean_g = 0.0, mean_gx = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                xhat[j] = (xr[j] - mu) * rstd;
                gxhat[j] = gr_row[j] * gv[j];
                mean_g += gxhat[j];
                mean_gx += gxhat[j] * xhat[j];
            }
            mean_g *= inv_d;
            mean_gx *= inv_d;
            if (gr.requires_grad(x)) {
                double* gx = gr.grad_buffer(x.id).data() + r * d;
                for (std::size_t j = 0; j < d; ++j) gx[j] += rstd * (gxhat[j] - mean_g - xhat[j] * mean_gx);
            }
            if (gr.requires_grad(gain)) {
                Tensor& gg = gr.grad_buffer(gain.id);
                for (std::size_t j = 0; j < d; ++j) gg[j] += gr_row[j] * xhat[j];
            }
            if (gr.requires_grad(bias)) {
                Tensor& gb = gr.grad_buffer(bias.id);
                for (std::size_t j = 0; j < d; ++j) gb[j] += gr_row[j];
            }
        }
    });
}

Var gelu(Graph& g, Var x) {
    constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
    constexpr double kInvSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    return elementwise_unary(
        g, OpTag::kGelu, x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
        [](double v, double) {
            return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
        });
}

Var tanh(Graph& g, Var x) {
    return elementwise_unary(
        g, OpTag::kTanh, x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Graph& g, Var x) {
    return elementwise_unary(
        g, OpTag::kSigmoid, x,
        [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor masked_softmax(const Tensor& logits, const Tensor& additive_mask) {
    check_mask_shape(logits, additive_mask);
    const bool per_column = additive_mask.shape() != logits.shape();
    const std::size_t n = logits.cols();
    Tensor out(logits.shape());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const double* lr = logits.data() + r * n;
        const double* mr = additive_mask.data() + (per_column ? 0 : r * n);
        double* orow = out.data() + r * n;
        bool any_kept = false;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            any_kept = any_kept || mr[j] == 0.0;
            orow[j] = lr[j] + mr[j];
            mx = std::max(mx, orow[j]);
        }
        if (!any_kept) throw ShapeError("masked_softmax: every entry of row " + std::to_string(r) + " is masked");
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            orow[j] = std::exp(orow[j] - mx);
            total += orow[j];
        }
        const double inv = 1.0 / total;
        for (std::size_t j = 0; j < n; ++j) orow[j] *= inv;
    }
    return out;
}

Var masked_softmax(Graph& g, Var logits, const Tensor& additive_mask) {
    Tensor out = masked_softmax(g.value(logits), additive_mask);
    return g.add_node(OpTag::kMaskedSoftmax, {logits.id}, std::move(out), [logits](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        const Tensor& y = gr.value(self);
        Tensor& gx = gr.grad_buffer(logits.id);
        const std::size_t n = y.cols();
        for (std::size_t r = 0; r < y.rows(); ++r) {
            const double* yr = y.data() + r * n;
            const double* gr_row = gout.data() + r * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += yr[j] * gr_row[j];
            double* gxr = gx.data() + r * n;
            for (std::size_t j = 0; j < n; ++j) gxr[j] += yr[j] * (gr_row[j] - dot);
        }
    });
}

Var slice_cols(Graph& g, Var x, std::size_t start, std::size_t width) {
    const Tensor& xv = g.value(x);
    require_rank2(xv, "slice_cols");
    const std::size_t c = xv.cols();
    if (width == 0 || start + width > c) throw ShapeError("slice_cols: range out of bounds");
    Tensor out({xv.rows(), width});
    for (std::size_t r = 0; r < xv.rows(); ++r) {
        std::copy_n(xv.data() + r * c + start, width, out.data() + r * width);
    }
    return g.add_node(OpTag::kSliceCols, {x.id}, std::move(out), [x, start, width](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        Tensor& gx = gr.grad_buffer(x.id);
        const std::size_t cols = gx.cols();
        for (std::size_t r = 0; r < gout.rows(); ++r) {
            for (std::size_t j = 0; j < width; ++j) gx[r * cols + start + j] += gout[r * width + j];
        }
    });
}

Var concat_cols(Graph& g, std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t rows = g.value(parts[0]).rows();
    std::size_t total = 0;
    std::vector<std::size_t> ids, offsets;
    for (Var p : parts) {
        const Tensor& pv = g.value(p);
        require_rank2(pv, "concat_cols");
        if (pv.rows() != rows) throw ShapeError("concat_cols: row counts differ");
        offsets.push_back(total);
        total += pv.cols();
        ids.push_back(p.id);
    }
    Tensor out({rows, total});
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const Tensor& pv = g.value(parts[i]);
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(pv.data() + r * pv.cols(), pv.cols(), out.data() + r * total + offsets[i]);
        }
    }
    return g.add_node(OpTag::kConcatCols, ids, std::move(out), [ids, offsets](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        const std::size_t cols = gout.cols();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!gr.requires_grad(ids[i])) continue;
            Tensor& gp = gr.grad_buffer(ids[i]);
            const std::size_t w = gp.cols();
            for (std::size_t r = 0; r < gp.rows(); ++r) {
                for (std::size_t j = 0; j < w; ++j) gp[r * w + j] += gout[r * cols + offsets[i] + j];
            }
        }
    });
}

Var concat_rows(Graph& g, std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t cols = g.value(parts[0]).cols();
    std::size_t rows = 0;
    std::vector<std::size_t> ids, offsets;
    for (Var p : parts) {
        const Tensor& pv = g.value(p);
        if (pv.cols() != cols) throw ShapeError("concat_rows: column counts differ");
        offsets.push_back(rows * cols);
        rows += pv.rows();
        ids.push_back(p.id);
    }
    Tensor out({rows, cols});
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const Tensor& pv = g.value(parts[i]);
        std::copy_n(pv.data(), pv.size(), out.data() + offsets[i]);
    }
    return g.add_node(OpTag::kConcatRows, ids, std::move(out), [ids, offsets](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!gr.requires_grad(ids[i])) continue;
            Tensor& gp = gr.grad_buffer(ids[i]);
            for (std::size_t j = 0; j < gp.size(); ++j) gp[j] += gout[offsets[i] + j];
        }
    });
}

Var gather_rows(Graph& g, Var x, std::span<const std::size_t> rows) {
    const Tensor& xv = g.value(x);
    const std::size_t c = xv.cols();
    if (rows.empty()) throw ShapeError("gather_rows: empty row list");
    for (std::size_t r : rows) {
        if (r >= xv.rows()) throw ShapeError("gather_rows: row index out of range");
    }
    Tensor out({rows.size(), c});
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(xv.data() + rows[i] * c, c, out.data() + i * c);
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    return g.add_node(OpTag::kGatherRows, {x.id}, std::move(out), [x, idx](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        Tensor& gx = gr.grad_buffer(x.id);
        const std::size_t cols = gx.cols();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < cols; ++j) gx[idx[i] * cols + j] += gout[i * cols + j];
        }
    });
}

Var replace_rows(Graph& g, Var x, std::span<const std::size_t> rows, Var token) {
    const Tensor& xv = g.value(x);
    const Tensor& tv = g.value(token);
    const std::size_t c = xv.cols();
    if (tv.size() != c) throw ShapeError("replace_rows: token width must equal row width");
    std::vector<char> replaced(xv.rows(), 0);
    for (std::size_t r : rows) {
        if (r >= xv.rows()) throw ShapeError("replace_rows: row index out of range");
        replaced[r] = 1;
    }
    Tensor out = xv;
    for (std::size_t r = 0; r < xv.rows(); ++r) {
        if (replaced[r]) std::copy_n(tv.data(), c, out.data() + r * c);
    }
    return g.add_node(OpTag::kReplaceRows, {x.id, token.id}, std::move(out),
                      [x, token, replaced = std::move(replaced)](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        const std::size_t cols = gout.cols();
        for (std::size_t r = 0; r < replaced.size(); ++r) {
            const double* src = gout.data() + r * cols;
            if (replaced[r]) {
                if (!gr.requires_grad(token)) continue;
                Tensor& gt = gr.grad_buffer(token.id);
                for (std::size_t j = 0; j < cols; ++j) gt[j] += src[j];
            } else if (gr.requires_grad(x)) {
                double* dst = gr.grad_buffer(x.id).data() + r * cols;
                for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
            }
        }
    });
}

Var sum(Graph& g, Var x) {
    const Tensor& xv = g.value(x);
    double s = 0.0;
    for (double v : xv.values()) s += v;
    return g.add_node(OpTag::kSum, {x.id}, Tensor::scalar(s), [x](Graph& gr, std::size_t self) {
        const double go = gr.grad_buffer(self)[0];
        Tensor& gx = gr.grad_buffer(x.id);
        for (double& v : gx.values()) v += go;
    });
}

Var mean(Graph& g, Var x) { return scale(g, sum(g, x), 1.0 / static_cast<double>(g.value(x).size())); }

Var mean_rows(Graph& g, Var x) {
    const Tensor& xv = g.value(x);
    const std::size_t c = xv.cols(), r = xv.rows();
    Tensor out({1, c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j] += xv[i * c + j];
    }
    const double inv = 1.0 / static_cast<double>(r);
    for (double& v : out.values()) v *= inv;
    return g.add_node(OpTag::kMeanRows, {x.id}, std::move(out), [x, inv](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        Tensor& gx = gr.grad_buffer(x.id);
        const std::size_t cols = gout.size();
        for (std::size_t i = 0; i < gx.size() / cols; ++i) {
            for (std::size_t j = 0; j < cols; ++j) gx[i * cols + j] += gout[j] * inv;
        }
    });
}

Var dropout(Graph& g, Var x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ShapeError("dropout rate must lie in [0, 1)");
    if (rate == 0.0) return x;
    const Tensor& xv = g.value(x);
    std::bernoulli_distribution keep(1.0 - rate);
    const double s = 1.0 / (1.0 - rate);
    std::vector<double> mask(xv.size());
    for (double& m : mask) m = keep(rng) ? s : 0.0;
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
    return g.add_node(OpTag::kDropout, {x.id}, std::move(out), [x, mask = std::move(mask)](Graph& gr, std::size_t self) {
        const Tensor& gout = gr.grad_buffer(self);
        Tensor& gx = gr.grad_buffer(x.id);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i] * mask[i];
    });
}

}  // namespace maskhit
