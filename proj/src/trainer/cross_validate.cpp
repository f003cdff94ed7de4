// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/trainer/cross_validate.hpp"

#include <algorithm>
#include <map>

#include "maskhit/error.hpp"

namespace maskhit {

std::vector<std::size_t> stratified_folds(const FeatureStore& store, TaskKind task, std::size_t folds, Rng& rng) {
    if (folds < 2) throw ConfigError("need at least 2 folds");
    std::vector<std::size_t> all(store.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const SlideTargets t = slide_targets(store, all, task);
    std::map<std::size_t, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < all.size(); ++i) {
        strata[task == TaskKind::kSurvival ? t.events[i] : t.classes[i]].push_back(i);
    }
    if (task == TaskKind::kSurvival && strata[1].size() < folds) {
        throw DataError("insufficient data for stratification: " + std::to_string(strata[1].size()) +
                        " events for " + std::to_string(folds) + " folds");
    }
    std::vector<std::size_t> fold_of(all.size());
    std::size_t next = 0;
    for (auto& [key, members] : strata) {
        if (task == TaskKind::kClassification && members.size() < folds) {
            throw DataError("insufficient data for stratification: class " + std::to_string(key) + " has " +
                            std::to_string(members.size()) + " slides for " + std::to_string(folds) + " folds");
        }
        std::shuffle(members.begin(), members.end(), rng);
        // Continuing the deal across strata keeps fold sizes within one of each other.
        for (std::size_t i : members) fold_of[i] = next++ % folds;
    }
    return fold_of;
}

FoldSplit fold_split(const std::vector<std::size_t>& fold_of, std::size_t folds, std::size_t k) {
    if (k >= folds) throw ConfigError("fold index out of range");
    FoldSplit s;
    const std::size_t m = (k + 1) % folds;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == k) s.test.push_back(i);
        else if (fold_of[i] == m) s.monitor.push_back(i);
        else s.train.push_back(i);
    }
    return s;
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t repeat, std::size_t fold) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (1 + repeat * 1000 + fold);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

CrossValidationResult cross_validate(const FeatureStore& store, const SlideModelSpec& spec,
                                     const ParamMap* pretrained_encoder, const FinetuneConfig& config,
                                     const FoldHook& hook) {
    config.validate();
    CrossValidationResult result;
    std::vector<double> values;
    for (std::size_t r = 0; r < config.repeats; ++r) {
        Rng fold_rng = make_rng(config.seed, 1000 + r);
        result.assignments.push_back(stratified_folds(store, config.task, config.folds, fold_rng));
        for (std::size_t k = 0; k < config.folds; ++k) {
            const FoldSplit split = fold_split(result.assignments.back(), config.folds, k);
            FinetuneConfig fc = config;
            fc.seed = fold_seed(config.seed, r, k);
            FinetuneResult ft = finetune(store, spec, pretrained_encoder, fc, split.train, split.monitor);
            if (hook) hook(r, k, ft.model);
            const Tensor scores = predict(store, ft.model, split.test, eval_sampling(fc));
            const double metric = task_metric(scores, slide_targets(store, split.test, config.task));
            result.folds.push_back({r, k, metric, ft.best_epoch, ft.epochs.size(), ft.epochs});
            values.push_back(metric);
        }
    }
    result.report = make_report(task_metric_name(config.task), std::move(values));
    return result;
}

}  // namespace maskhit
