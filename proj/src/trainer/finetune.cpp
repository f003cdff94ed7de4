// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/trainer/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "maskhit/error.hpp"
#include "maskhit/losses/losses.hpp"
#include "maskhit/metrics/metrics.hpp"

namespace maskhit {

const char* stop_monitor_name(StopMonitor monitor) { return monitor == StopMonitor::kLoss ? "loss" : "metric"; }

StopMonitor parse_stop_monitor(const std::string& text) {
    if (text == "loss") return StopMonitor::kLoss;
    if (text == "metric") return StopMonitor::kMetric;
    throw ConfigError("monitor must be 'loss' or 'metric', got '" + text + "'");
}

double default_head_lr(TaskKind task) { return task == TaskKind::kSurvival ? 1e-3 : 3e-3; }

void FinetuneConfig::validate() const {
    if (regions_train == 0 || regions_eval == 0) throw ConfigError("regions per slide must be >= 1");
    for (double c : {coverage_train, coverage_eval}) {
        if (!(c > 0.0 && c <= 1.0)) throw ConfigError("coverage must lie in (0, 1]");
    }
    if (head_lr < 0.0 || !std::isfinite(head_lr)) throw ConfigError("head_lr must be >= 0");
    if (backend_lr < 0.0 || !std::isfinite(backend_lr)) throw ConfigError("backend_lr must be >= 0");
    if (patience == 0) throw ConfigError("patience must be >= 1");
    if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(max_overlap >= 0.0 && max_overlap <= 1.0)) throw ConfigError("max_overlap must lie in [0, 1]");
    if (!(min_foreground > 0.0 && min_foreground <= 1.0)) throw ConfigError("min_foreground must lie in (0, 1]");
    if (folds < 3) throw ConfigError("folds must be >= 3");
    if (repeats == 0) throw ConfigError("repeats must be >= 1");
}

FinetuneConfig FinetuneConfig::desk(TaskKind task) {
    FinetuneConfig c;
    c.task = task;
    return c;
}

FinetuneConfig FinetuneConfig::paper(TaskKind task) {
    FinetuneConfig c;
    c.task = task;
    c.backend_lr = 1e-5;
    c.repeats = 5;
    return c;
}

FinetuneConfig FinetuneConfig::frozen_backend() const {
    FinetuneConfig c = *this;
    c.backend_lr = 0.0;
    return c;
}

SlideTargets slide_targets(const FeatureStore& store, std::span<const std::size_t> slides, TaskKind task) {
    SlideTargets t;
    t.task = task;
    for (std::size_t i : slides) {
        const SlideRecord& s = store.slide(i);
        if (task == TaskKind::kSurvival) {
            const auto* lab = std::get_if<SurvivalLabel>(&s.label);
            if (!lab) throw DataError("slide '" + s.slide_id + "' has a class label but the task is survival");
            t.times.push_back(lab->time_years);
            t.events.push_back(lab->event ? 1 : 0);
        } else {
            const auto* lab = std::get_if<ClassLabel>(&s.label);
            if (!lab) throw DataError("slide '" + s.slide_id + "' has a survival label but the task is classification");
            t.classes.push_back(lab->id);
        }
    }
    return t;
}

std::size_t task_outputs(const FeatureStore& store, TaskKind task) {
    if (task == TaskKind::kSurvival) return 1;
    std::vector<std::size_t> all(store.size());
    std::iota(all.begin(), all.end(), 0);
    const SlideTargets t = slide_targets(store, all, task);
    if (t.classes.empty()) throw DataError("store has no slides");
    return *std::max_element(t.classes.begin(), t.classes.end()) + 1;
}

double task_loss(const Tensor& outputs, const SlideTargets& targets) {
    if (targets.task == TaskKind::kSurvival) return cox_loss_value(outputs.values(), targets.times, targets.events);
    return cross_entropy_value(outputs, targets.classes);
}

namespace {

Tensor softmax_rows(const Tensor& logits) { return masked_softmax(logits, Tensor({logits.cols()}, 0.0)); }

}  // namespace

double task_metric(const Tensor& outputs, const SlideTargets& targets) {
    if (targets.task == TaskKind::kSurvival) return c_index(outputs.values(), targets.times, targets.events);
    return macro_auc(softmax_rows(outputs), targets.classes).value;
}

const char* task_metric_name(TaskKind task) { return task == TaskKind::kSurvival ? "c_index" : "macro_auc"; }

EvalSampling eval_sampling(const FinetuneConfig& config) {
    return EvalSampling{config.regions_eval, config.coverage_eval, config.max_overlap, config.min_foreground,
                        config.seed};
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<RegionTensor> eval_regions(const FeatureStore& store, std::size_t slide, std::uint32_t side,
                                       const EvalSampling& sampling) {
    const SlideRecord& s = store.slide(slide);
    std::vector<RegionTensor> regions;
    Rng rng = make_rng(sampling.seed, fnv1a(s.slide_id));
    for (const RegionSpec& spec :
         systematic_regions(s, side, sampling.regions, sampling.max_overlap, sampling.min_foreground)) {
        RegionTensor r = gather_region(s, store.feature_dim(), spec);
        if (sampling.coverage < 1.0) r = subsample_coverage(r, sampling.coverage, rng);
        regions.push_back(std::move(r));
    }
    return regions;
}

std::vector<RegionTensor> train_regions(const FeatureStore& store, std::size_t slide, std::uint32_t side,
                                        const FinetuneConfig& cfg, Rng& rng) {
    const SlideRecord& s = store.slide(slide);
    std::vector<RegionTensor> regions;
    for (const RegionSpec& spec :
         sample_region_set(s, side, cfg.regions_train, cfg.max_overlap, rng, cfg.min_foreground)) {
        RegionTensor r = gather_region(s, store.feature_dim(), spec);
        if (cfg.coverage_train < 1.0) r = subsample_coverage(r, cfg.coverage_train, rng);
        if (cfg.augment_symmetry) r = transform_region(r, std::uniform_int_distribution<unsigned>(0, 7)(rng));
        regions.push_back(std::move(r));
    }
    return regions;
}

// MIL models have no native region size; they sample with the encoder's.
std::uint32_t region_side(const SlideModelSpec& spec) { return static_cast<std::uint32_t>(spec.encoder.region_side); }

}  // namespace

Tensor predict(const FeatureStore& store, const SlideModel& model, std::span<const std::size_t> slides,
               const EvalSampling& sampling) {
    model.spec.validate();
    if (store.feature_dim() != model.spec.feature_dim) throw ConfigError("store feature dim differs from the model's");
    if (slides.empty()) return Tensor();
    Tensor out({slides.size(), model.spec.outputs});
    for (std::size_t i = 0; i < slides.size(); ++i) {
        const auto regions = eval_regions(store, slides[i], region_side(model.spec), sampling);
        Graph g;
        const Tensor& y = g.value(slide_forward(g, model.spec, model.params, regions));
        std::copy(y.data(), y.data() + model.spec.outputs, out.data() + i * model.spec.outputs);
    }
    return out;
}

FinetuneResult finetune(const FeatureStore& store, const SlideModelSpec& spec, const ParamMap* pretrained_encoder,
                        const FinetuneConfig& config, std::span<const std::size_t> train,
                        std::span<const std::size_t> monitor) {
    config.validate();
    spec.validate();
    if (spec.task != config.task) throw ConfigError("model task differs from the fine-tuning task");
    if (store.feature_dim() != spec.feature_dim) throw ConfigError("store feature dim differs from the model's");
    if (train.empty() || monitor.empty()) throw DataError("fine-tuning needs non-empty train and monitor splits");
    const SlideTargets train_t = slide_targets(store, train, config.task);
    const SlideTargets monitor_t = slide_targets(store, monitor, config.task);
    if (config.task == TaskKind::kSurvival &&
        std::none_of(train_t.events.begin(), train_t.events.end(), [](std::uint8_t e) { return e != 0; })) {
        throw DataError("survival training split has no events");
    }
    for (std::size_t c : train_t.classes) {
        if (c >= spec.outputs) throw DataError("class id " + std::to_string(c) + " exceeds model outputs");
    }

    Rng init_rng = make_rng(config.seed, 11);
    Rng rng = make_rng(config.seed, 12);
    FinetuneResult result;
    result.model.spec = spec;
    ParamMap& params = result.model.params;
    params = init_slide_model(spec, pretrained_encoder, init_rng);

    const double head_lr = config.resolved_head_lr();
    const double backend_lr = config.backend_lr;
    auto lr_for = [&](const std::string& name) { return is_backend_param(name) ? backend_lr : head_lr; };
    AdamW opt(config.adamw);
    const MonitorDirection dir =
        config.monitor == StopMonitor::kLoss ? MonitorDirection::kMinimize : MonitorDirection::kMaximize;
    EarlyStopState stop(config.patience, dir);
    ParamMap best = params;
    const EvalSampling sampling = eval_sampling(config);
    const std::uint32_t side = region_side(spec);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochLog log;
        log.epoch = epoch;
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            SlideTargets bt;
            bt.task = config.task;
            for (std::size_t r = begin; r < end; ++r) {
                const std::size_t o = order[r];
                if (config.task == TaskKind::kSurvival) {
                    bt.times.push_back(train_t.times[o]);
                    bt.events.push_back(train_t.events[o]);
                } else {
                    bt.classes.push_back(train_t.classes[o]);
                }
            }
            // The partial likelihood is undefined without an event; such batches are skipped.
            const bool survival = config.task == TaskKind::kSurvival;
            if (survival && std::none_of(bt.events.begin(), bt.events.end(), [](std::uint8_t e) { return e != 0; })) {
                ++log.skipped_batches;
                continue;
            }
            Graph g;
            std::vector<Var> outs;
            for (std::size_t r = begin; r < end; ++r) {
                const auto regions = train_regions(store, train[order[r]], side, config, rng);
                outs.push_back(slide_forward(g, spec, params, regions, ForwardOptions{true, &rng}));
            }
            Var y = outs.size() == 1 ? outs[0] : concat_rows(g, outs);
            Var loss = survival ? cox_loss(g, y, bt.times, bt.events) : cross_entropy(g, y, bt.classes);
            g.backward(loss);
            opt.step(params, g.parameter_grads(), lr_for);
            loss_sum += g.value(loss).item();
            ++batches;
        }
        log.train_loss = batches ? loss_sum / static_cast<double>(batches) : std::numeric_limits<double>::quiet_NaN();

        const Tensor monitor_out = predict(store, result.model, monitor, sampling);
        log.monitor_loss = task_loss(monitor_out, monitor_t);
        try {
            log.monitor_metric = task_metric(monitor_out, monitor_t);
        } catch (const DataError&) {
            log.monitor_metric = std::numeric_limits<double>::quiet_NaN();
        }
        result.epochs.push_back(log);
        const double watched = config.monitor == StopMonitor::kLoss ? log.monitor_loss : log.monitor_metric;
        if (stop.update(watched)) best = params;
        if (stop.should_stop()) {
            result.stopped_early = true;
            break;
        }
    }
    params = std::move(best);
    result.best_epoch = stop.best_epoch();
    result.best_monitor = stop.best();
    return result;
}

FinetuneResult baseline_mil(const FeatureStore& store, ModelKind variant, std::size_t region_side,
                            const FinetuneConfig& config, std::span<const std::size_t> train,
                            std::span<const std::size_t> monitor) {
    if (variant == ModelKind::kMaskHIT) throw ConfigError("baseline_mil expects a MIL variant");
    SlideModelSpec spec;
    spec.kind = variant;
    spec.task = config.task;
    spec.outputs = task_outputs(store, config.task);
    spec.feature_dim = store.feature_dim();
    spec.encoder.dim = store.feature_dim();
    spec.encoder.region_side = region_side;
    return finetune(store, spec, nullptr, config, train, monitor);
}

}  // namespace maskhit
