// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "maskhit/numcore/graph.hpp"

namespace maskhit {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay and bias-corrected moments.
class AdamW {
public:
    explicit AdamW(AdamWConfig config = {}) : config_(config) {}

    /// One update of every parameter present in `grads`, all at learning rate `lr`.
    void step(ParamMap& params, const ParamMap& grads, double lr);
    /// Per-parameter learning rate, e.g. separate head and backbone groups.
    void step(ParamMap& params, const ParamMap& grads, const std::function<double(const std::string&)>& lr_for);

    std::uint64_t step_count() const noexcept { return step_; }
    const AdamWConfig& config() const noexcept { return config_; }

    /// Moments as "m.<name>" / "v.<name>" plus a one-element "step" entry.
    ParamMap export_state() const;
    void import_state(const ParamMap& state);

private:
    AdamWConfig config_;
    std::uint64_t step_ = 0;
    ParamMap first_;
    ParamMap second_;
};

/// Linear warmup from zero to the peak, then cosine annealing to the floor.
struct LrSchedule {
    double peak_lr = 4e-5;
    std::int64_t warmup_steps = 0;
    std::int64_t total_steps = 1;
    double floor_lr = 0.0;

    void validate() const;
    double lr_at(std::int64_t step) const;
};

}  // namespace maskhit
