// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "maskhit/metrics/metrics.hpp"
#include "maskhit/trainer/finetune.hpp"

namespace maskhit {

/// Fold id per slide. Slides are shuffled within each stratum (event flag or
/// class) and dealt round-robin, so every fold gets a near-equal share of each
/// stratum. Throws DataError when a stratum has fewer members than folds.
std::vector<std::size_t> stratified_folds(const FeatureStore& store, TaskKind task, std::size_t folds, Rng& rng);

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> monitor;
    std::vector<std::size_t> test;
};
/// Test = fold k, monitor = fold (k + 1) mod folds, train = the rest.
FoldSplit fold_split(const std::vector<std::size_t>& fold_of, std::size_t folds, std::size_t k);

struct FoldOutcome {
    std::size_t repeat = 0;
    std::size_t fold = 0;
    double test_metric = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    std::vector<EpochLog> epochs;
};

struct CrossValidationResult {
    EvalReport report;
    std::vector<FoldOutcome> folds;
    std::vector<std::vector<std::size_t>> assignments;  // per repeat, fold id per slide
};

/// Seed of the fine-tuning run for (repeat, fold).
std::uint64_t fold_seed(std::uint64_t seed, std::size_t repeat, std::size_t fold);

/// Called with each fold's best model before it is scored; may replace the
/// parameters (for example with their checkpoint round trip).
using FoldHook = std::function<void(std::size_t repeat, std::size_t fold, SlideModel& model)>;

/// folds x repeats fine-tuning runs, each scored on its test fold.
CrossValidationResult cross_validate(const FeatureStore& store, const SlideModelSpec& spec,
                                     const ParamMap* pretrained_encoder, const FinetuneConfig& config,
                                     const FoldHook& hook = {});

}  // namespace maskhit
