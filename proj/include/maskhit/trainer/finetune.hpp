// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maskhit/featstore/store.hpp"
#include "maskhit/numcore/optim.hpp"
#include "maskhit/trainer/early_stop.hpp"
#include "maskhit/trainer/slide_model.hpp"

namespace maskhit {

/// What early stopping watches on the monitor split.
enum class StopMonitor { kLoss, kMetric };
const char* stop_monitor_name(StopMonitor monitor);
StopMonitor parse_stop_monitor(const std::string& text);

/// 1e-3 for survival, 3e-3 for classification.
double default_head_lr(TaskKind task);

struct FinetuneConfig {
    TaskKind task = TaskKind::kSurvival;
    std::size_t regions_train = 4;
    std::size_t regions_eval = 16;
    double coverage_train = 1.0;
    double coverage_eval = 1.0;
    bool augment_symmetry = false;  // random rotation or reflection per training region
    double head_lr = 0.0;  // 0 picks default_head_lr(task)
    double backend_lr = 1e-3;
    std::size_t patience = 5;
    std::size_t max_epochs = 40;
    std::size_t batch_size = 16;
    double max_overlap = kDefaultMaxOverlap;
    double min_foreground = kDefaultMinForeground;
    StopMonitor monitor = StopMonitor::kLoss;
    std::size_t folds = 5;
    std::size_t repeats = 1;
    AdamWConfig adamw;
    std::uint64_t seed = 0;

    void validate() const;
    double resolved_head_lr() const { return head_lr > 0.0 ? head_lr : default_head_lr(task); }

    static FinetuneConfig desk(TaskKind task);
    /// Backend lr 1e-5, 5 repeats.
    static FinetuneConfig paper(TaskKind task);
    /// Same settings with the backend frozen (backend lr 0).
    FinetuneConfig frozen_backend() const;
};

/// Slide-level labels of a subset, checked against the task.
struct SlideTargets {
    TaskKind task = TaskKind::kSurvival;
    std::vector<double> times;
    std::vector<std::uint8_t> events;
    std::vector<std::size_t> classes;

    std::size_t size() const noexcept { return task == TaskKind::kSurvival ? times.size() : classes.size(); }
};
SlideTargets slide_targets(const FeatureStore& store, std::span<const std::size_t> slides, TaskKind task);

/// 1 for survival, max class id + 1 for classification.
std::size_t task_outputs(const FeatureStore& store, TaskKind task);

/// Cox loss or cross entropy of stacked slide outputs (N x outputs).
double task_loss(const Tensor& outputs, const SlideTargets& targets);
/// c-index of risk scores, or macro AUC of softmax probabilities.
double task_metric(const Tensor& outputs, const SlideTargets& targets);
const char* task_metric_name(TaskKind task);

struct SlideModel {
    SlideModelSpec spec;
    ParamMap params;
};

struct EvalSampling {
    std::size_t regions = 16;
    double coverage = 1.0;
    double max_overlap = kDefaultMaxOverlap;
    double min_foreground = kDefaultMinForeground;
    std::uint64_t seed = 0;  // only used when coverage < 1
};
EvalSampling eval_sampling(const FinetuneConfig& config);

/// Deterministic per-slide outputs (N x outputs) from systematically placed
/// regions. Each slide is scored independently of the others.
Tensor predict(const FeatureStore& store, const SlideModel& model, std::span<const std::size_t> slides,
               const EvalSampling& sampling);

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double monitor_loss = 0.0;
    double monitor_metric = 0.0;  // NaN when undefined on the monitor split
    std::size_t skipped_batches = 0;
};

struct FinetuneResult {
    SlideModel model;  // parameters of the best monitor epoch
    std::vector<EpochLog> epochs;
    std::size_t best_epoch = 0;
    double best_monitor = 0.0;
    bool stopped_early = false;
};

/// Trains a slide model on `train`, early-stopping on `monitor`. The encoder of
/// a MaskHIT model starts from `pretrained_encoder` when given.
FinetuneResult finetune(const FeatureStore& store, const SlideModelSpec& spec, const ParamMap* pretrained_encoder,
                        const FinetuneConfig& config, std::span<const std::size_t> train,
                        std::span<const std::size_t> monitor);

/// finetune() for the MIL-AP / MIL-Attn baselines, sampling regions of the
/// given side exactly as MaskHIT does.
FinetuneResult baseline_mil(const FeatureStore& store, ModelKind variant, std::size_t region_side,
                            const FinetuneConfig& config, std::span<const std::size_t> train,
                            std::span<const std::size_t> monitor);

}  // namespace maskhit
