// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/trainer/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maskhit/error.hpp"
#include "maskhit/featstore/sampling.hpp"
#include "maskhit/masking/mask.hpp"

namespace maskhit {

void PretrainConfig::validate() const {
    if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw ConfigError("pretrain mask_rate must lie in (0, 1)");
    if (batch_size == 0) throw ConfigError("pretrain batch_size must be >= 1");
    if (total_steps == 0) throw ConfigError("pretrain total_steps must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("pretrain train_fraction must lie in (0, 1)");
    if (monitor_interval == 0) throw ConfigError("pretrain monitor_interval must be >= 1");
    if (monitor_regions == 0) throw ConfigError("pretrain monitor_regions must be >= 1");
    if (!(min_foreground > 0.0 && min_foreground <= 1.0)) throw ConfigError("min_foreground must lie in (0, 1]");
    loss.validate();
    schedule().validate();
}

LrSchedule PretrainConfig::schedule() const {
    return LrSchedule{peak_lr, static_cast<std::int64_t>(warmup_steps), static_cast<std::int64_t>(total_steps),
                      floor_lr};
}

PretrainConfig PretrainConfig::desk() { return PretrainConfig{}; }

PretrainConfig PretrainConfig::paper() {
    PretrainConfig c;
    c.batch_size = 64;
    c.total_steps = 400000;
    c.warmup_steps = 8000;
    c.peak_lr = 4e-5;
    c.monitor_interval = 1000;
    c.monitor_regions = 256;
    return c;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_slide(std::size_t slides, double train_fraction,
                                                                               Rng& rng) {
    if (slides < 2) throw DataError("need at least 2 slides to split train and monitor sets");
    std::vector<std::size_t> order(slides);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(slides)));
    n_train = std::clamp<std::size_t>(n_train, 1, slides - 1);
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> monitor(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train.begin(), train.end());
    std::sort(monitor.begin(), monitor.end());
    return {std::move(train), std::move(monitor)};
}

namespace {

struct MaskedRegion {
    RegionTensor region;
    MaskPlan plan;
};

MaskedRegion draw_masked_region(const FeatureStore& store, std::size_t slide, const EncoderConfig& enc,
                                const PretrainConfig& cfg, Rng& rng) {
    const SlideRecord& s = store.slide(slide);
    const RegionSpec spec = sample_region(s, static_cast<std::uint32_t>(enc.region_side), rng, cfg.min_foreground);
    MaskedRegion out{gather_region(s, store.feature_dim(), spec), {}};
    out.plan = blockwise_mask(out.region, cfg.mask_rate, rng);
    return out;
}

// Builds the restoration loss of one batch on `g`.
RestorationTerms batch_loss(Graph& g, const std::vector<MaskedRegion>& batch, const EncoderConfig& enc,
                            const ParamMap& params, const PretrainConfig& cfg, bool training, Rng* rng) {
    std::vector<Var> outputs;
    std::vector<double> targets;
    std::size_t k = 0;
    const std::size_t d = enc.dim;
    for (const MaskedRegion& m : batch) {
        Var input = encoder_input(g, params, m.region, m.plan.masked_positions);
        EncoderOutput out = encode(g, input, m.region.background, enc, params, EncodeOptions{training, rng, false});
        std::vector<std::size_t> rows;
        for (std::size_t c : m.plan.masked_positions) {
            rows.push_back(c + 1);  // row 0 is the class token
            const auto f = m.region.features.row(c);
            targets.insert(targets.end(), f.begin(), f.end());
            ++k;
        }
        outputs.push_back(gather_rows(g, out.tokens, rows));
    }
    Var y = outputs.size() == 1 ? outputs[0] : concat_rows(g, outputs);
    return restoration_loss(g, y, Tensor({k, d}, std::move(targets)), cfg.loss);
}

double monitor_loss(const std::vector<MaskedRegion>& monitor, const EncoderConfig& enc, const ParamMap& params,
                    const PretrainConfig& cfg) {
    double sum = 0.0;
    std::size_t chunks = 0;
    for (std::size_t begin = 0; begin < monitor.size(); begin += cfg.batch_size) {
        const std::size_t end = std::min(monitor.size(), begin + cfg.batch_size);
        std::vector<MaskedRegion> chunk(monitor.begin() + static_cast<std::ptrdiff_t>(begin),
                                        monitor.begin() + static_cast<std::ptrdiff_t>(end));
        Graph g;
        sum += batch_loss(g, chunk, enc, params, cfg, false, nullptr).values.total;
        ++chunks;
    }
    return sum / static_cast<double>(chunks);
}

}  // namespace

PretrainResult pretrain(const FeatureStore& store, const EncoderConfig& encoder, ParamMap params,
                        const PretrainConfig& config) {
    config.validate();
    encoder.validate();
    check_encoder_params(params, encoder);
    if (store.feature_dim() != encoder.dim) throw ConfigError("store feature dim differs from encoder dim");

    Rng split_rng = make_rng(config.seed, 1);
    Rng monitor_rng = make_rng(config.seed, 2);
    Rng rng = make_rng(config.seed, 3);
    auto [train, monitor_slides] = split_by_slide(store.size(), config.train_fraction, split_rng);

    PretrainResult result;
    for (std::size_t i : train) result.train_ids.push_back(store.slide(i).slide_id);
    for (std::size_t i : monitor_slides) result.monitor_ids.push_back(store.slide(i).slide_id);

    std::vector<MaskedRegion> monitor;
    for (std::size_t i = 0; i < config.monitor_regions; ++i) {
        monitor.push_back(draw_masked_region(store, monitor_slides[i % monitor_slides.size()], encoder, config,
                                             monitor_rng));
    }

    const LrSchedule schedule = config.schedule();
    AdamW opt(config.adamw);
    result.monitor.push_back({0, monitor_loss(monitor, encoder, params, config)});
    ParamMap last_good = params;
    result.best_params = params;
    double best_loss = result.monitor.back().loss;
    std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);

    try {
        for (std::size_t step = 1; step <= config.total_steps; ++step) {
            std::vector<MaskedRegion> batch;
            for (std::size_t b = 0; b < config.batch_size; ++b) {
                batch.push_back(draw_masked_region(store, train[pick(rng)], encoder, config, rng));
            }
            Graph g;
            RestorationTerms loss = batch_loss(g, batch, encoder, params, config, true, &rng);
            g.backward(loss.total);
            const double lr = schedule.lr_at(static_cast<std::int64_t>(step));
            opt.step(params, g.parameter_grads(), lr);
            for (const auto& [name, t] : params) {
                if (!t.all_finite()) throw DivergenceError("parameter '" + name + "' became non-finite");
            }
            last_good = params;
            result.steps.push_back({step, lr, loss.values.l2, loss.values.contrastive, loss.values.total});
            if (step % config.monitor_interval == 0 || step == config.total_steps) {
                result.monitor.push_back({step, monitor_loss(monitor, encoder, params, config)});
                if (result.monitor.back().loss < best_loss) {
                    best_loss = result.monitor.back().loss;
                    result.best_params = params;
                    result.best_step = step;
                }
            }
        }
        result.optimizer = opt.export_state();
    } catch (const DivergenceError& e) {
        result.diverged = true;
        result.divergence_message = e.what();
    }
    result.params = std::move(last_good);
    return result;
}

}  // namespace maskhit
