// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace maskhit {

enum class MonitorDirection { kMinimize, kMaximize };

/// Patience counter over per-epoch monitor values. Epochs are 1-based.
class EarlyStopState {
public:
    explicit EarlyStopState(std::size_t patience, MonitorDirection direction = MonitorDirection::kMinimize);

    /// Records the next epoch's value; true when it strictly improves on the best.
    bool update(double value);

    bool should_stop() const noexcept { return stagnant_ >= patience_; }
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best() const noexcept { return best_; }
    std::size_t stagnant() const noexcept { return stagnant_; }
    std::size_t patience() const noexcept { return patience_; }

private:
    std::size_t patience_;
    MonitorDirection direction_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t stagnant_ = 0;
    double best_ = 0.0;
};

}  // namespace maskhit
