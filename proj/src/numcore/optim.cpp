// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/numcore/optim.hpp"

#include <cmath>
#include <numbers>

#include "maskhit/error.hpp"

namespace maskhit {

void AdamW::step(ParamMap& params, const ParamMap& grads, double lr) {
    step(params, grads, [lr](const std::string&) { return lr; });
}

void AdamW::step(ParamMap& params, const ParamMap& grads,
                 const std::function<double(const std::string&)>& lr_for) {
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end()) throw ShapeError("gradient for unknown parameter '" + name + "'");
        if (it->second.shape() != g.shape()) {
            throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match parameter '" + name +
                             "' " + shape_str(it->second.shape()));
        }
        if (!g.all_finite()) throw DivergenceError("non-finite gradient for parameter '" + name + "'");
        if (lr_for(name) < 0.0) throw ConfigError("negative learning rate for '" + name + "'");
    }

    ++step_;
    const double t = static_cast<double>(step_);
    const double bc1 = 1.0 - std::pow(config_.beta1, t);
    const double bc2 = 1.0 - std::pow(config_.beta2, t);

    for (const auto& [name, g] : grads) {
        Tensor& theta = params.at(name);
        auto [m_it, m_new] = first_.try_emplace(name, theta.shape(), 0.0);
        auto [v_it, v_new] = second_.try_emplace(name, theta.shape(), 0.0);
        Tensor& m = m_it->second;
        Tensor& v = v_it->second;
        const double lr = lr_for(name);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
        }
        // A zero learning rate leaves the parameter bit-identical (frozen groups).
        if (lr == 0.0) continue;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            theta[i] -= lr * config_.weight_decay * theta[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

ParamMap AdamW::export_state() const {
    ParamMap out;
    for (const auto& [name, m] : first_) out.emplace("m." + name, m);
    for (const auto& [name, v] : second_) out.emplace("v." + name, v);
    out.emplace("step", Tensor::scalar(static_cast<double>(step_)));
    return out;
}

void AdamW::import_state(const ParamMap& state) {
    first_.clear();
    second_.clear();
    step_ = 0;
    for (const auto& [key, t] : state) {
        if (key == "step") {
            step_ = static_cast<std::uint64_t>(t.item());
        } else if (key.starts_with("m.")) {
            first_.emplace(key.substr(2), t);
        } else if (key.starts_with("v.")) {
            second_.emplace(key.substr(2), t);
        } else {
            throw DataError("unknown optimizer state entry '" + key + "'");
        }
    }
}

void LrSchedule::validate() const {
    if (warmup_steps < 0 || warmup_steps > total_steps) {
        throw ConfigError("lr schedule needs 0 <= warmup_steps <= total_steps");
    }
    if (total_steps < 1) throw ConfigError("lr schedule needs total_steps >= 1");
    if (floor_lr > peak_lr) throw ConfigError("lr schedule needs floor_lr <= peak_lr");
    if (floor_lr < 0.0) throw ConfigError("lr schedule needs floor_lr >= 0");
}

double LrSchedule::lr_at(std::int64_t step) const {
    if (step < 0 || step > total_steps) {
        throw ConfigError("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
    }
    if (step < warmup_steps) {
        return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    const std::int64_t span = total_steps - warmup_steps;
    if (span == 0) return peak_lr;
    const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(span);
    return floor_lr + 0.5 * (peak_lr - floor_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace maskhit
