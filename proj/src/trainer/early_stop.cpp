// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/trainer/early_stop.hpp"

#include <cmath>

#include "maskhit/error.hpp"

namespace maskhit {

EarlyStopState::EarlyStopState(std::size_t patience, MonitorDirection direction)
    : patience_(patience), direction_(direction) {
    if (patience == 0) throw ConfigError("early-stop patience must be >= 1");
}

bool EarlyStopState::update(double value) {
    if (std::isnan(value)) throw DivergenceError("monitor value is NaN");
    ++epoch_;
    const bool improved = best_epoch_ == 0 ||
                          (direction_ == MonitorDirection::kMinimize ? value < best_ : value > best_);
    if (improved) {
        best_ = value;
        best_epoch_ = epoch_;
        stagnant_ = 0;
    } else {
        ++stagnant_;
    }
    return improved;
}

}  // namespace maskhit
