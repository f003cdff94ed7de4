// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "maskhit/error.hpp"

namespace maskhit {

const char* contrastive_sign_name(ContrastiveSign sign) {
    return sign == ContrastiveSign::kLiteral ? "literal" : "negated";
}

ContrastiveSign parse_contrastive_sign(const std::string& text) {
    if (text == "negated") return ContrastiveSign::kNegatedDistance;
    if (text == "literal") return ContrastiveSign::kLiteral;
    throw ConfigError("contrastive sign must be 'negated' or 'literal', got '" + text + "'");
}

void RestorationConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("restoration alpha must be >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("restoration beta must be >= 0");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("restoration tau must be > 0");
}

namespace {

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Evaluates the restoration loss; fills d(total)/d(outputs) when grad != nullptr.
RestorationValues restoration_eval(const Tensor& y, const Tensor& x, const RestorationConfig& cfg, Tensor* grad) {
    cfg.validate();
    if (y.rank() != 2 || x.rank() != 2 || y.shape() != x.shape()) {
        throw ShapeError("restoration loss: outputs " + shape_str(y.shape()) + " and targets " +
                         shape_str(x.shape()) + " must be equal-shape matrices");
    }
    const std::size_t k = y.rows(), d = y.cols();
    if (k == 0) throw DataError("restoration loss: empty batch");
    const double sigma = cfg.sign == ContrastiveSign::kNegatedDistance ? -1.0 : 1.0;

    // dist(i, j) = ||x_j - y_i||
    std::vector<double> dist(k * k);
    for (std::size_t i = 0; i < k; ++i) {
        const double* yi = y.data() + i * d;
        for (std::size_t j = 0; j < k; ++j) {
            const double* xj = x.data() + j * d;
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = xj[c] - yi[c];
                s += diff * diff;
            }
            dist[i * k + j] = std::sqrt(s);
        }
    }

    RestorationValues out;
    std::vector<double> logits(k), prob(k);
    const double inv_k = 1.0 / static_cast<double>(k);
    if (grad) *grad = Tensor(y.shape(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) logits[j] = sigma * dist[i * k + j] / cfg.tau;
        const double lse = log_sum_exp(logits);
        const double ci = lse - logits[i];
        out.l2 += dist[i * k + i];
        out.contrastive += ci;
        if (!grad) continue;

        double* gi = grad->data() + i * d;
        const double* yi = y.data() + i * d;
        const double dii = dist[i * k + i];
        if (cfg.alpha != 0.0 && dii > 0.0) {
            const double w = cfg.alpha * inv_k / dii;
            const double* xi = x.data() + i * d;
            for (std::size_t c = 0; c < d; ++c) gi[c] += w * (yi[c] - xi[c]);
        }
        if (cfg.beta == 0.0) continue;
        for (std::size_t j = 0; j < k; ++j) prob[j] = std::exp(logits[j] - lse);
        for (std::size_t j = 0; j < k; ++j) {
            const double dij = dist[i * k + j];
            if (dij == 0.0) continue;
            const double coeff = prob[j] - (j == i ? 1.0 : 0.0);
            const double w = cfg.beta * inv_k * coeff * sigma / (cfg.tau * dij);
            const double* xj = x.data() + j * d;
            for (std::size_t c = 0; c < d; ++c) gi[c] += w * (yi[c] - xj[c]);
        }
    }
    out.l2 *= inv_k;
    out.contrastive *= inv_k;
    out.total = cfg.alpha * out.l2 + cfg.beta * out.contrastive;
    return out;
}

void check_survival(std::size_t n, std::span<const double> times, std::span<const std::uint8_t> events) {
    if (n == 0) throw DataError("cox loss: empty batch");
    if (times.size() != n || events.size() != n) throw ShapeError("cox loss: risks, times and events differ in length");
    for (double t : times) {
        if (!(t > 0.0) || !std::isfinite(t)) throw DataError("cox loss: survival times must be positive and finite");
    }
    if (std::none_of(events.begin(), events.end(), [](std::uint8_t e) { return e != 0; })) {
        throw DataError("cox loss: batch has no events");
    }
}

// Returns the loss and, when grad != nullptr, d(loss)/d(risk).
double cox_eval(std::span<const double> h, std::span<const double> times, std::span<const std::uint8_t> events,
                std::vector<double>* grad) {
    const std::size_t n = h.size();
    check_survival(n, times, events);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    // log_risk[i] = log sum_{T_j >= T_i} exp(h_j), swept from the latest time down.
    // Equal times share one value, so ties join every member's risk set.
    std::vector<double> log_risk(n);
    const double neg_inf = -std::numeric_limits<double>::infinity();
    double acc = neg_inf;
    for (std::size_t end = n; end > 0;) {
        std::size_t begin = end;
        while (begin > 0 && times[order[begin - 1]] == times[order[end - 1]]) --begin;
        for (std::size_t r = begin; r < end; ++r) {
            const double v = h[order[r]];
            const double m = std::max(acc, v);
            acc = m + std::log(std::exp(acc - m) + std::exp(v - m));
        }
        for (std::size_t r = begin; r < end; ++r) log_risk[order[r]] = acc;
        end = begin;
    }

    std::size_t n_events = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!events[i]) continue;
        ++n_events;
        total += h[i] - log_risk[i];
    }
    const double inv_e = 1.0 / static_cast<double>(n_events);
    if (grad) {
        // d/dh_k = -(1/E) [delta_k - exp(h_k) * sum_{i event, T_i <= T_k} exp(-log_risk_i)].
        grad->assign(n, 0.0);
        double inv_acc = neg_inf;
        for (std::size_t begin = 0; begin < n;) {
            std::size_t end = begin;
            while (end < n && times[order[end]] == times[order[begin]]) ++end;
            for (std::size_t r = begin; r < end; ++r) {
                const std::size_t i = order[r];
                if (!events[i]) continue;
                const double v = -log_risk[i];
                const double m = std::max(inv_acc, v);
                inv_acc = m + std::log(std::exp(inv_acc - m) + std::exp(v - m));
            }
            for (std::size_t r = begin; r < end; ++r) {
                const std::size_t k = order[r];
                const double share = inv_acc == neg_inf ? 0.0 : std::exp(h[k] + inv_acc);
                (*grad)[k] = -inv_e * ((events[k] ? 1.0 : 0.0) - share);
            }
            begin = end;
        }
    }
    return -inv_e * total;
}

double ce_eval(const Tensor& logits, std::span<const std::size_t> labels, Tensor* grad) {
    if (logits.rank() != 2) throw ShapeError("cross entropy expects N x C logits");
    const std::size_t n = logits.rows(), c = logits.cols();
    if (labels.size() != n) throw ShapeError("cross entropy: one label per row required");
    if (n == 0) throw DataError("cross entropy: empty batch");
    const double inv_n = 1.0 / static_cast<double>(n);
    if (grad) *grad = Tensor(logits.shape(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= c) {
            throw DataError("cross entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                            std::to_string(c) + ")");
        }
        const auto row = logits.row(i);
        const double lse = log_sum_exp(row);
        total += lse - row[labels[i]];
        if (grad) {
            for (std::size_t j = 0; j < c; ++j) {
                grad->at(i, j) = inv_n * (std::exp(row[j] - lse) - (j == labels[i] ? 1.0 : 0.0));
            }
        }
    }
    return total * inv_n;
}

}  // namespace

RestorationTerms restoration_loss(Graph& g, Var outputs, const Tensor& targets, const RestorationConfig& config) {
    Tensor grad;
    const RestorationValues v = restoration_eval(g.value(outputs), targets, config, &grad);
    Var total = g.add_node(OpTag::kRestorationLoss, {outputs.id}, Tensor::scalar(v.total),
                           [outputs, grad = std::move(grad)](Graph& gr, std::size_t self) {
                               const double go = gr.grad_buffer(self)[0];
                               Tensor& gy = gr.grad_buffer(outputs.id);
                               for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += go * grad[i];
                           });
    return RestorationTerms{total, v};
}

RestorationValues restoration_loss_value(const Tensor& outputs, const Tensor& targets, const RestorationConfig& config) {
    return restoration_eval(outputs, targets, config, nullptr);
}

Var cox_loss(Graph& g, Var risks, std::span<const double> times, std::span<const std::uint8_t> events) {
    std::vector<double> grad;
    const double loss = cox_eval(g.value(risks).values(), times, events, &grad);
    return g.add_node(OpTag::kCoxLoss, {risks.id}, Tensor::scalar(loss),
                      [risks, grad = std::move(grad)](Graph& gr, std::size_t self) {
                          const double go = gr.grad_buffer(self)[0];
                          Tensor& gh = gr.grad_buffer(risks.id);
                          for (std::size_t i = 0; i < gh.size(); ++i) gh[i] += go * grad[i];
                      });
}

double cox_loss_value(std::span<const double> risks, std::span<const double> times,
                      std::span<const std::uint8_t> events) {
    return cox_eval(risks, times, events, nullptr);
}

Var cross_entropy(Graph& g, Var logits, std::span<const std::size_t> labels) {
    Tensor grad;
    const double loss = ce_eval(g.value(logits), labels, &grad);
    return g.add_node(OpTag::kCrossEntropy, {logits.id}, Tensor::scalar(loss),
                      [logits, grad = std::move(grad)](Graph& gr, std::size_t self) {
                          const double go = gr.grad_buffer(self)[0];
                          Tensor& gl = gr.grad_buffer(logits.id);
                          for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += go * grad[i];
                      });
}

double cross_entropy_value(const Tensor& logits, std::span<const std::size_t> labels) {
    return ce_eval(logits, labels, nullptr);
}

}  // namespace maskhit
