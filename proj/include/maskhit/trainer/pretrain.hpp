// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "maskhit/encoder/encoder.hpp"
#include "maskhit/featstore/store.hpp"
#include "maskhit/losses/losses.hpp"
#include "maskhit/numcore/optim.hpp"

namespace maskhit {

struct PretrainConfig {
    double mask_rate = 0.4;
    std::size_t batch_size = 8;
    std::size_t total_steps = 2000;
    std::size_t warmup_steps = 200;
    double peak_lr = 1e-3;
    double floor_lr = 0.0;
    double train_fraction = 0.8;
    std::size_t monitor_interval = 100;
    std::size_t monitor_regions = 32;
    double min_foreground = kDefaultMinForeground;
    RestorationConfig loss;
    AdamWConfig adamw;
    std::uint64_t seed = 0;

    void validate() const;
    LrSchedule schedule() const;

    static PretrainConfig desk();
    /// Batch 64, 400k steps, 8k warmup, peak lr 4e-5.
    static PretrainConfig paper();
};

struct PretrainStepLog {
    std::size_t step = 0;
    double lr = 0.0;
    double l2 = 0.0;
    double contrastive = 0.0;
    double total = 0.0;
};

struct MonitorPoint {
    std::size_t step = 0;  // 0 = initial parameters
    double loss = 0.0;
};

struct PretrainResult {
    ParamMap params;         // last good parameters
    ParamMap optimizer;      // AdamW state matching `params`
    ParamMap best_params;    // parameters at the lowest monitor loss
    std::size_t best_step = 0;
    std::vector<PretrainStepLog> steps;
    std::vector<MonitorPoint> monitor;
    std::vector<std::string> train_ids;
    std::vector<std::string> monitor_ids;
    bool diverged = false;
    std::string divergence_message;

    double initial_monitor() const { return monitor.front().loss; }
    double final_monitor() const { return monitor.back().loss; }
};

/// Slide indices split into (train, monitor), disjoint and both non-empty.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_slide(std::size_t slides, double train_fraction,
                                                                               Rng& rng);

/// Masked patch restoration. On a non-finite loss or gradient the run stops,
/// `diverged` is set and `params` holds the last finite parameters.
PretrainResult pretrain(const FeatureStore& store, const EncoderConfig& encoder, ParamMap params,
                        const PretrainConfig& config);

}  // namespace maskhit
