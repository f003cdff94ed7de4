// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. Arguments select criteria by number (default: all).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "maskhit/attnviz/attnviz.hpp"
#include "maskhit/cli/commands.hpp"
#include "maskhit/encoder/encoder.hpp"
#include "maskhit/featstore/synth.hpp"
#include "maskhit/losses/losses.hpp"
#include "maskhit/masking/mask.hpp"
#include "maskhit/metrics/metrics.hpp"
#include "maskhit/numcore/binary_io.hpp"
#include "maskhit/numcore/checkpoint.hpp"
#include "maskhit/trainer/cross_validate.hpp"
#include "maskhit/trainer/pretrain.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace maskhit;
using namespace maskhit::testing;
namespace fs = std::filesystem;

namespace {

// ---- Tolerances and limits -------------------------------------------------

constexpr double kFdStep = 1e-5;
constexpr double kFdTolerance = 1e-4;
constexpr std::size_t kPipelineProbes = 50;
constexpr double kCoxTolerance = 1e-10;
constexpr double kRestorationTolerance = 1e-12;
constexpr std::size_t kOracleInstances = 200;
constexpr std::size_t kMaskDraws = 10000;
constexpr double kBackgroundWeight = 1e-20;
constexpr double kRowSumTolerance = 1e-9;
constexpr double kPerturbTolerance = 1e-9;
constexpr double kStochasticTolerance = 1e-9;
constexpr double kRolloutTolerance = 1e-12;
constexpr double kPretrainRatio = 0.5;
constexpr double kMilApCeiling = 0.6;
constexpr double kMaskHitFloor = 0.9;

// Wall-clock budgets in seconds; 0 means none.
constexpr double kBudget[11] = {0, 120, 60, 60, 60, 30, 900, 1800, 0, 0, 300};

// ---- Shared experiment settings ---------------------------------------------

// Desk store for criterion 6; its checkpoint seeds criteria 7 to 9.
constexpr std::uint64_t kPretrainStoreSeed = 7;
constexpr std::uint64_t kPretrainSeed = 7;

SynthConfig pretrain_store_config() {
    SynthConfig c;
    c.slide_count = 64;
    c.grid_width = 16;
    c.grid_height = 16;
    c.feature_dim = 64;
    c.prototypes = 8;
    c.noise_sigma = 0.1;
    c.task = SynthTask::kSpatialClassification;
    c.num_classes = 2;
    return c;
}

// Planted spatial task: one desk region covers the whole slide.
SynthConfig spatial_store_config() {
    SynthConfig c = pretrain_store_config();
    c.slide_count = 200;
    c.grid_width = 8;
    c.grid_height = 8;
    c.motif_size = 8;
    c.noise_sigma = 0.02;
    return c;
}

FinetuneConfig spatial_finetune(std::uint64_t seed) {
    FinetuneConfig f = FinetuneConfig::desk(TaskKind::kClassification);
    f.regions_train = 1;
    f.regions_eval = 1;
    f.augment_symmetry = true;
    f.backend_lr = 3e-4;
    f.max_epochs = 120;
    f.patience = 40;
    f.seed = seed;
    return f;
}

SynthConfig survival_store_config() {
    SynthConfig c = pretrain_store_config();
    c.task = SynthTask::kSurvival;
    c.slide_count = 200;
    c.grid_width = 24;
    c.grid_height = 24;
    return c;
}

FinetuneConfig survival_finetune(std::uint64_t seed) {
    FinetuneConfig f = FinetuneConfig::desk(TaskKind::kSurvival);
    f.regions_train = 4;
    f.max_epochs = 20;
    f.seed = seed;
    return f;
}

SlideModelSpec maskhit_spec(TaskKind task, std::size_t outputs) {
    SlideModelSpec s;
    s.kind = ModelKind::kMaskHIT;
    s.task = task;
    s.outputs = outputs;
    s.feature_dim = 64;
    s.encoder = EncoderConfig::desk();
    return s;
}

// ---- Small helpers -----------------------------------------------------------

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v, const char* f = "%.3f") {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ",") + fmt(f, x);
    return s;
}

// sum(x * W) with a fixed random W, so every output entry reaches the loss.
Var weighted_sum(Graph& g, Var x, std::uint64_t seed = 7) {
    Rng r(seed);
    return sum(g, mul(g, x, g.constant(random_tensor(g.value(x).shape(), r))));
}

// ---- Criterion 1: gradients --------------------------------------------------

Outcome criterion_gradients() {
    Rng rng(101);
    double worst_op = 0.0;
    std::string worst_name;
    auto check = [&](const std::string& name, const ScalarFn& f, std::vector<Tensor> inputs) {
        const double e = max_grad_error(f, std::move(inputs), kFdStep);
        if (e >= worst_op) {
            worst_op = e;
            worst_name = name;
        }
    };
    const Tensor a = random_tensor({4, 5}, rng), b = random_tensor({5, 3}, rng), c = random_tensor({4, 5}, rng);
    const Tensor bias = random_tensor({5}, rng), row = random_tensor({1, 5}, rng);
    check("matmul", [](Graph& g, const auto& v) { return weighted_sum(g, matmul(g, v[0], v[1])); }, {a, b});
    check("matmul_nt", [](Graph& g, const auto& v) { return weighted_sum(g, matmul_nt(g, v[0], v[1])); }, {a, c});
    check("add", [](Graph& g, const auto& v) { return weighted_sum(g, add(g, v[0], v[1])); }, {a, c});
    check("sub", [](Graph& g, const auto& v) { return weighted_sum(g, sub(g, v[0], v[1])); }, {a, c});
    check("mul", [](Graph& g, const auto& v) { return weighted_sum(g, mul(g, v[0], v[1])); }, {a, c});
    check("scale", [](Graph& g, const auto& v) { return weighted_sum(g, scale(g, v[0], -1.7)); }, {a});
    check("add_bias", [](Graph& g, const auto& v) { return weighted_sum(g, add_bias(g, v[0], v[1])); }, {a, bias});
    check("layer_norm", [](Graph& g, const auto& v) { return weighted_sum(g, layer_norm(g, v[0], v[1], v[2])); },
          {a, random_tensor({5}, rng), bias});
    check("gelu", [](Graph& g, const auto& v) { return weighted_sum(g, gelu(g, v[0])); }, {a});
    check("tanh", [](Graph& g, const auto& v) { return weighted_sum(g, maskhit::tanh(g, v[0])); }, {a});
    check("sigmoid", [](Graph& g, const auto& v) { return weighted_sum(g, sigmoid(g, v[0])); }, {a});
    Tensor key_mask({5}, 0.0);
    key_mask[1] = kBackgroundLogit;
    check("masked_softmax", [&](Graph& g, const auto& v) { return weighted_sum(g, masked_softmax(g, v[0], key_mask)); },
          {a});
    check("slice_cols", [](Graph& g, const auto& v) { return weighted_sum(g, slice_cols(g, v[0], 1, 3)); }, {a});
    check("concat_cols",
          [](Graph& g, const auto& v) {
              const Var parts[2] = {v[0], v[1]};
              return weighted_sum(g, concat_cols(g, parts));
          },
          {a, c});
    check("concat_rows",
          [](Graph& g, const auto& v) {
              const Var parts[2] = {v[0], v[1]};
              return weighted_sum(g, concat_rows(g, parts));
          },
          {a, row});
    const std::vector<std::size_t> rows{3, 0, 3, 1}, replaced{0, 2};
    check("gather_rows", [&](Graph& g, const auto& v) { return weighted_sum(g, gather_rows(g, v[0], rows)); }, {a});
    check("replace_rows",
          [&](Graph& g, const auto& v) { return weighted_sum(g, replace_rows(g, v[0], replaced, v[1])); }, {a, row});
    check("sum", [](Graph& g, const auto& v) { return sum(g, mul(g, v[0], v[0])); }, {a});
    check("mean", [](Graph& g, const auto& v) { return mean(g, mul(g, v[0], v[0])); }, {a});
    check("mean_rows", [](Graph& g, const auto& v) { return weighted_sum(g, mean_rows(g, v[0])); }, {a});
    check("dropout",
          [](Graph& g, const auto& v) {
              Rng r(3);
              return weighted_sum(g, dropout(g, v[0], 0.3, r));
          },
          {a});
    const Tensor target = random_tensor({4, 5}, rng);
    for (ContrastiveSign sign : {ContrastiveSign::kNegatedDistance, ContrastiveSign::kLiteral}) {
        RestorationConfig rc;
        rc.sign = sign;
        rc.tau = 0.7;
        check("restoration_loss", [&](Graph& g, const auto& v) { return restoration_loss(g, v[0], target, rc).total; },
              {a});
    }
    const std::vector<double> times{2.0, 1.0, 3.0, 1.0, 4.0};
    const std::vector<std::uint8_t> events{1, 1, 0, 1, 0};
    check("cox_loss", [&](Graph& g, const auto& v) { return cox_loss(g, v[0], times, events); },
          {random_tensor({5, 1}, rng)});
    const std::vector<std::size_t> labels{0, 2, 1, 4};
    check("cross_entropy", [&](Graph& g, const auto& v) { return cross_entropy(g, v[0], labels); }, {a});

    // Encoder + restoration pipeline.
    EncoderConfig ec;
    ec.layers = 2;
    ec.heads = 2;
    ec.dim = 16;
    ec.region_side = 4;
    ec.dropout = 0.0;
    ParamMap params = init_encoder_params(ec, rng);
    for (auto& [name, t] : params) {
        for (double& v : t.values()) v += std::normal_distribution<double>(0.0, 0.3)(rng);
    }
    const RegionTensor region = random_region(4, ec.dim, random_background(16, 0.3, rng), rng);
    Rng mask_rng(5);
    const MaskPlan plan = blockwise_mask(region, 0.4, mask_rng);
    std::vector<std::size_t> out_rows;
    for (std::size_t m : plan.masked_positions) out_rows.push_back(m + 1);
    Tensor targets({plan.masked_positions.size(), ec.dim});
    for (std::size_t i = 0; i < plan.masked_positions.size(); ++i) {
        for (std::size_t j = 0; j < ec.dim; ++j) targets.at(i, j) = region.features.at(plan.masked_positions[i], j);
    }
    const ParamLossFn pipeline = [&](Graph& g) {
        const EncoderOutput out = encode(g, encoder_input(g, params, region, plan.masked_positions), region.background,
                                         ec, params);
        return restoration_loss(g, gather_rows(g, out.tokens, out_rows), targets, RestorationConfig{}).total;
    };
    const double worst_pipe = max_param_grad_error(params, pipeline, random_probes(params, kPipelineProbes, rng), kFdStep);

    return {worst_op < kFdTolerance && worst_pipe < kFdTolerance,
            "worst op error " + fmt("%.2e", worst_op) + " (" + worst_name + "), pipeline " +
                fmt("%.2e", worst_pipe) + " over " + std::to_string(kPipelineProbes) + " probes"};
}

// ---- Criterion 2: oracles ----------------------------------------------------

Outcome criterion_oracles() {
    Rng rng(202);
    std::size_t cox_n = 0, cidx_n = 0, rest_n = 0, auc_n = 0;
    bool cox_ok = true, cidx_ok = true, rest_ok = true, auc_ok = true;
    std::uniform_int_distribution<int> small(0, 5);
    std::bernoulli_distribution coin(0.5);

    while (cox_n < kOracleInstances) {
        const std::size_t n = 1 + cox_n % 15;
        std::vector<double> h(n), t(n);
        std::vector<std::uint8_t> e(n);
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = std::normal_distribution<double>(0.0, 1.5)(rng);
            t[i] = 1 + small(rng);
            e[i] = coin(rng);
        }
        e[cox_n % n] = 1;
        cox_ok = cox_ok && relative_error(cox_loss_value(h, t, e), naive_cox(h, t, e), 1.0) < kCoxTolerance;
        ++cox_n;
    }
    while (cidx_n < kOracleInstances) {
        const std::size_t n = 2 + cidx_n % 20;
        std::vector<double> r(n), t(n);
        std::vector<std::uint8_t> e(n);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = small(rng);
            t[i] = 1 + small(rng);
            e[i] = coin(rng);
        }
        double got = 0.0;
        try {
            got = c_index(r, t, e);
        } catch (const DataError&) {
            continue;  // no comparable pair
        }
        cidx_ok = cidx_ok && got == naive_c_index(r, t, e);
        ++cidx_n;
    }
    for (; rest_n < kOracleInstances; ++rest_n) {
        const std::size_t k = 1 + rest_n % 8, d = 1 + rest_n % 7;
        const Tensor y = random_tensor({k, d}, rng), x = random_tensor({k, d}, rng);
        RestorationConfig rc;
        rc.tau = 0.05 + 0.5 * static_cast<double>(rest_n % 5);
        rc.sign = rest_n % 2 ? ContrastiveSign::kLiteral : ContrastiveSign::kNegatedDistance;
        const auto v = restoration_loss_value(y, x, rc);
        const auto o = naive_restoration(y, x, rc.tau, rc.sign == ContrastiveSign::kLiteral ? 1.0 : -1.0);
        rest_ok = rest_ok && relative_error(v.l2, o.l2, 1.0) < kRestorationTolerance &&
                  relative_error(v.contrastive, o.contrastive, 1.0) < kRestorationTolerance;
    }
    for (; auc_n < kOracleInstances; ++auc_n) {
        const std::size_t n = 4 + auc_n % 25, classes = 2 + auc_n % 4;
        Tensor scores({n, classes});
        for (double& v : scores.values()) v = small(rng) / 5.0;
        std::vector<std::size_t> labels(n);
        std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
        for (auto& l : labels) l = pick(rng);
        labels[0] = 0;
        labels[1] = 1;
        auc_ok = auc_ok && macro_auc(scores, labels).value == naive_macro_auc(scores, labels);
    }
    auto tag = [](bool ok) { return ok ? "ok" : "MISMATCH"; };
    return {cox_ok && cidx_ok && rest_ok && auc_ok,
            std::string("cox ") + tag(cox_ok) + ", c-index " + tag(cidx_ok) + ", restoration " + tag(rest_ok) +
                ", macro AUC " + tag(auc_ok) + " (" + std::to_string(kOracleInstances) + " instances each)"};
}

// ---- Criterion 3: masking ----------------------------------------------------

bool four_connected(const std::vector<std::size_t>& cells, std::size_t n) {
    std::set<std::size_t> in(cells.begin(), cells.end()), seen{cells.front()};
    std::vector<std::size_t> stack{cells.front()};
    while (!stack.empty()) {
        const std::size_t c = stack.back();
        stack.pop_back();
        const std::size_t x = c % n, y = c / n;
        for (std::size_t m : {x > 0 ? c - 1 : c, x + 1 < n ? c + 1 : c, y > 0 ? c - n : c, y + 1 < n ? c + n : c}) {
            if (in.count(m) && seen.insert(m).second) stack.push_back(m);
        }
    }
    return seen.size() == in.size();
}

Outcome criterion_masking() {
    Rng rng(303);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t count_bad = 0, bg_bad = 0, block_bad = 0;
    for (std::size_t draw = 0; draw < kMaskDraws; ++draw) {
        const std::size_t n = 2 + draw % 11;
        const auto bg = random_background(n * n, 0.8 * unit(rng), rng);
        const RegionTensor region = random_region(n, 2, bg, rng);
        const double p = unit(rng);
        const MaskPlan plan = blockwise_mask(region, p, rng);
        const std::size_t want = static_cast<std::size_t>(std::ceil(p * static_cast<double>(region.foreground_count())));
        const std::size_t got = plan.masked_positions.size();
        if (got < want || got > want + 3) ++count_bad;
        for (std::size_t c : plan.masked_positions) bg_bad += bg[c] != 0;
        std::vector<std::size_t> cover;
        for (const MaskBlock& b : plan.blocks) {
            if (b.cells.empty() || b.cells.size() > 4 || !four_connected(b.cells, n)) ++block_bad;
            cover.insert(cover.end(), b.cells.begin(), b.cells.end());
        }
        std::sort(cover.begin(), cover.end());
        if (cover != plan.masked_positions) ++block_bad;
    }
    return {count_bad == 0 && bg_bad == 0 && block_bad == 0,
            std::to_string(kMaskDraws) + " draws: count violations " + std::to_string(count_bad) +
                ", background masked " + std::to_string(bg_bad) + ", bad blocks " + std::to_string(block_bad)};
}

// ---- Criterion 4: attention masking ------------------------------------------

Outcome criterion_attention() {
    Rng rng(404);
    EncoderConfig ec = EncoderConfig::desk();
    ec.dropout = 0.0;
    ParamMap params = init_encoder_params(ec, rng);
    for (auto& [name, t] : params) {
        for (double& v : t.values()) v += std::normal_distribution<double>(0.0, 0.3)(rng);
    }
    const std::size_t n = ec.region_side, s = ec.sequence_length();
    double max_bg = 0.0, max_row = 0.0, max_shift = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const auto bg = random_background(n * n, 0.1 + 0.025 * trial, rng);
        RegionTensor region = random_region(n, ec.dim, bg, rng);
        const EncodedRegion a = encode_region(region, ec, params);
        for (const Tensor& att : a.attentions) {
            for (std::size_t r = 0; r < ec.heads * s; ++r) {
                double sum_row = 0.0;
                for (std::size_t k = 0; k < s; ++k) {
                    const double w = att[r * s + k];
                    sum_row += w;
                    if (k > 0 && bg[k - 1]) max_bg = std::max(max_bg, w);
                }
                max_row = std::max(max_row, std::abs(sum_row - 1.0));
            }
        }
        for (std::size_t j = 0; j < n * n; ++j) {
            if (!bg[j]) continue;
            for (std::size_t c = 0; c < ec.dim; ++c) region.features.at(j, c) = std::normal_distribution<double>(0.0, 50.0)(rng);
        }
        const EncodedRegion b = encode_region(region, ec, params);
        for (std::size_t r = 0; r < s; ++r) {
            if (r > 0 && bg[r - 1]) continue;
            for (std::size_t c = 0; c < ec.dim; ++c) {
                max_shift = std::max(max_shift, std::abs(a.tokens.at(r, c) - b.tokens.at(r, c)));
            }
        }
    }
    return {max_bg < kBackgroundWeight && max_row < kRowSumTolerance && max_shift < kPerturbTolerance,
            "max background weight " + fmt("%.1e", max_bg) + ", max row-sum error " + fmt("%.1e", max_row) +
                ", max output shift " + fmt("%.1e", max_shift)};
}

// ---- Criterion 5: rollout ----------------------------------------------------

Outcome criterion_rollout() {
    Rng rng(505);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_row = 0.0, worst_oracle = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t s = 2 + trial % 20, layers = 1 + trial % 6, heads = 1 + trial % 4;
        std::vector<Tensor> stack;
        std::vector<std::vector<double>> averaged;
        for (std::size_t l = 0; l < layers; ++l) {
            Tensor t({heads, s, s});
            for (std::size_t r = 0; r < heads * s; ++r) {
                double sum_row = 0.0;
                for (std::size_t c = 0; c < s; ++c) sum_row += (t[r * s + c] = u(rng) * (u(rng) < 0.2 ? 0.0 : 1.0) + 1e-3);
                for (std::size_t c = 0; c < s; ++c) t[r * s + c] /= sum_row;
            }
            std::vector<double> avg(s * s, 0.0);
            for (std::size_t h = 0; h < heads; ++h) {
                for (std::size_t i = 0; i < s * s; ++i) avg[i] += t[h * s * s + i] / static_cast<double>(heads);
            }
            stack.push_back(std::move(t));
            averaged.push_back(std::move(avg));
        }
        for (bool residual : {false, true}) {
            for (RolloutOrder order : {RolloutOrder::kLaterLeft, RolloutOrder::kEarlierLeft}) {
                const Tensor r = rollout(stack, RolloutOptions{residual, order});
                const auto o = naive_rollout(averaged, s, residual, order == RolloutOrder::kLaterLeft);
                for (std::size_t i = 0; i < s; ++i) {
                    double sum_row = 0.0;
                    for (std::size_t j = 0; j < s; ++j) {
                        sum_row += r.at(i, j);
                        worst_oracle = std::max(worst_oracle, std::abs(r.at(i, j) - o[i * s + j]));
                    }
                    worst_row = std::max(worst_row, std::abs(sum_row - 1.0));
                }
            }
        }
    }
    return {worst_row < kStochasticTolerance && worst_oracle < kRolloutTolerance,
            "max row-sum error " + fmt("%.1e", worst_row) + ", max oracle difference " + fmt("%.1e", worst_oracle)};
}

// ---- Criterion 6: pretraining (checkpoint reused by 7 to 9) -------------------

struct PretrainedEncoder {
    ParamMap params;
    double initial = 0.0;
    double final = 0.0;
};

const PretrainedEncoder& pretrained_encoder() {
    static std::optional<PretrainedEncoder> cache;
    if (!cache) {
        const FeatureStore store = synth_generate(pretrain_store_config(), kPretrainStoreSeed);
        PretrainConfig pc = PretrainConfig::desk();
        pc.seed = kPretrainSeed;
        Rng rng(kPretrainSeed);
        const EncoderConfig ec = EncoderConfig::desk();
        const PretrainResult r = pretrain(store, ec, init_encoder_params(ec, rng), pc);
        cache = PretrainedEncoder{r.best_params, r.initial_monitor(), r.final_monitor()};
        if (r.diverged) cache->final = std::numeric_limits<double>::infinity();
    }
    return *cache;
}

Outcome criterion_pretraining() {
    const PretrainedEncoder& p = pretrained_encoder();
    const double ratio = p.final / p.initial;
    return {ratio <= kPretrainRatio, "monitor loss " + fmt("%.3f", p.initial) + " -> " + fmt("%.3f", p.final) +
                                         " (ratio " + fmt("%.3f", ratio) + ", 2000 steps)"};
}

// ---- Criterion 7: spatial separation ----------------------------------------

constexpr std::uint64_t kSpatialSeeds[3] = {1, 2, 3};

Outcome criterion_spatial() {
    const FeatureStore store = synth_generate(spatial_store_config(), 11);
    const ParamMap& encoder = pretrained_encoder().params;
    std::vector<double> ap, mh;
    for (std::uint64_t seed : kSpatialSeeds) {
        const FinetuneConfig f = spatial_finetune(seed);
        SlideModelSpec spec = maskhit_spec(TaskKind::kClassification, 2);
        spec.kind = ModelKind::kMilAP;
        ap.push_back(cross_validate(store, spec, nullptr, f).report.mean);
        spec.kind = ModelKind::kMaskHIT;
        mh.push_back(cross_validate(store, spec, &encoder, f).report.mean);
    }
    const double ap_med = median(ap), mh_med = median(mh);
    return {ap_med <= kMilApCeiling && mh_med >= kMaskHitFloor,
            "median macro-AUC MIL-AP " + fmt("%.3f", ap_med) + " [" + join(ap) + "], MaskHIT " + fmt("%.3f", mh_med) +
                " [" + join(mh) + "]"};
}

// ---- Criterion 8: pretraining benefit ----------------------------------------

constexpr std::uint64_t kBenefitSeeds[5] = {1, 2, 3, 4, 5};

Outcome criterion_benefit() {
    const FeatureStore store = synth_generate(spatial_store_config(), 11);
    const ParamMap& encoder = pretrained_encoder().params;
    const SlideModelSpec spec = maskhit_spec(TaskKind::kClassification, 2);
    std::vector<double> scratch_epochs, pretrained_epochs, frozen_auc, tuned_auc;
    std::size_t frozen_worse = 0;
    for (std::uint64_t seed : kBenefitSeeds) {
        Rng rng(seed);
        const auto folds = stratified_folds(store, TaskKind::kClassification, 5, rng);
        const FoldSplit split = fold_split(folds, 5, 0);
        const FinetuneConfig f = spatial_finetune(seed);
        const FinetuneResult scratch = finetune(store, spec, nullptr, f, split.train, split.monitor);
        const FinetuneResult tuned = finetune(store, spec, &encoder, f, split.train, split.monitor);
        const FinetuneResult frozen = finetune(store, spec, &encoder, f.frozen_backend(), split.train, split.monitor);
        scratch_epochs.push_back(static_cast<double>(scratch.best_epoch));
        double reached = std::numeric_limits<double>::infinity();
        for (const EpochLog& e : tuned.epochs) {
            if (e.monitor_loss <= scratch.best_monitor) {
                reached = static_cast<double>(e.epoch);
                break;
            }
        }
        pretrained_epochs.push_back(reached);
        const SlideTargets targets = slide_targets(store, split.test, TaskKind::kClassification);
        const EvalSampling sampling = eval_sampling(f);
        tuned_auc.push_back(task_metric(predict(store, tuned.model, split.test, sampling), targets));
        frozen_auc.push_back(task_metric(predict(store, frozen.model, split.test, sampling), targets));
        frozen_worse += frozen_auc.back() < tuned_auc.back();
    }
    const double scratch_med = median(scratch_epochs), pre_med = median(pretrained_epochs);
    return {pre_med < scratch_med && frozen_worse >= 4,
            "median epochs to scratch best: pretrained " + fmt("%g", pre_med) + " [" + join(pretrained_epochs, "%g") +
                "] vs scratch " + fmt("%g", scratch_med) + " [" + join(scratch_epochs, "%g") +
                "]; frozen < fine-tuned AUC in " + std::to_string(frozen_worse) + "/5 seeds (frozen [" +
                join(frozen_auc) + "], fine-tuned [" + join(tuned_auc) + "])"};
}

// ---- Criterion 9: evaluation coverage ----------------------------------------

constexpr std::uint64_t kCoverageSeeds[5] = {1, 2, 3, 4, 5};

Outcome criterion_coverage() {
    const FeatureStore store = synth_generate(survival_store_config(), 13);
    const ParamMap& encoder = pretrained_encoder().params;
    const SlideModelSpec spec = maskhit_spec(TaskKind::kSurvival, 1);
    std::vector<double> many, few, diff;
    for (std::uint64_t seed : kCoverageSeeds) {
        Rng rng(seed);
        const auto folds = stratified_folds(store, TaskKind::kSurvival, 5, rng);
        const FoldSplit split = fold_split(folds, 5, 0);
        const FinetuneConfig f = survival_finetune(seed);
        const FinetuneResult r = finetune(store, spec, &encoder, f, split.train, split.monitor);
        const SlideTargets targets = slide_targets(store, split.test, TaskKind::kSurvival);
        EvalSampling sampling = eval_sampling(f);
        sampling.regions = 16;
        many.push_back(task_metric(predict(store, r.model, split.test, sampling), targets));
        sampling.regions = 2;
        few.push_back(task_metric(predict(store, r.model, split.test, sampling), targets));
        diff.push_back(many.back() - few.back());
    }
    return {median(diff) >= 0.0, "median c-index gain of M=16 over M=2 " + fmt("%.4f", median(diff)) +
                                     " (M=16 median " + fmt("%.3f", median(many)) + " [" + join(many) +
                                     "], M=2 median " + fmt("%.3f", median(few)) + " [" + join(few) + "])"};
}

// ---- Criterion 10: determinism and serialization ------------------------------

const char* kDeterminismConfig = R"({
  "synth": {"slide_count": 30, "grid_width": 12, "grid_height": 12, "feature_dim": 16},
  "encoder": {"layers": 1, "heads": 2, "dim": 16, "region_side": 4},
  "pretrain": {"total_steps": 30, "warmup_steps": 3, "batch_size": 4, "monitor_interval": 10, "monitor_regions": 4},
  "finetune": {"regions_train": 2, "regions_eval": 2, "max_epochs": 3, "folds": 3, "batch_size": 6}
})";

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "maskhit");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome criterion_determinism() {
    const fs::path root = fs::temp_directory_path() / ("maskhit_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    auto path = [&](const std::string& name) { return (root / name).string(); };
    write_file_bytes(path("cfg.json"), kDeterminismConfig);
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };

    for (const char* task : {"survival", "classification"}) {
        const std::string t = task;
        const std::string store = path(t + ".mhfs");
        expect(cli({"--config", path("cfg.json"), "--seed", "5", "synth", "--task", t, "--out", store}) == 0,
               t + " synth");
        for (const char* run : {"a", "b"}) {
            const std::string r = run;
            expect(cli({"--config", path("cfg.json"), "--seed", "5", "pretrain", "--store", store, "--out",
                        path(t + "_pt_" + r)}) == 0,
                   t + " pretrain");
            expect(cli({"--config", path("cfg.json"), "--seed", "5", "finetune", "--task", t, "--store", store,
                        "--checkpoint", path(t + "_pt_" + r + "/best.mhck"), "--out", path(t + "_ft_" + r)}) == 0,
                   t + " finetune");
        }
        for (const char* f : {"best.mhck", "last.mhck", "monitor_log.tsv", "train_log.tsv"}) {
            expect(read_file_bytes(path(t + "_pt_a/") + f) == read_file_bytes(path(t + "_pt_b/") + f),
                   t + " pretrain " + f + " differs");
        }
        for (const char* f : {"report.json", "report.tsv", "fold_r0_k0.mhck", "fold_r0_k2.mhck"}) {
            expect(read_file_bytes(path(t + "_ft_a/") + f) == read_file_bytes(path(t + "_ft_b/") + f),
                   t + " finetune " + f + " differs");
        }

        const std::string bytes = read_file_bytes(store);
        expect(encode_store(decode_store(bytes)) == bytes, t + " store round trip");
        write_store(read_store(store), path(t + "_copy.mhfs"));
        expect(read_file_bytes(path(t + "_copy.mhfs")) == bytes, t + " store rewrite");
        const std::string ck = read_file_bytes(path(t + "_pt_a/last.mhck"));
        expect(encode_checkpoint(decode_checkpoint(ck)) == ck, t + " checkpoint round trip");
    }

    const Heatmap golden{3, {0.25, 0.5, 0.0, 1.0, 0.75, 0.125, 0.0, 0.375, 0.625}, {1, 1, 0, 1, 1, 1, 0, 1, 1}};
    const std::string dir = MASKHIT_GOLDEN_DIR;
    export_heatmap(golden, path("g.pgm"), HeatmapFormat::kPgm);
    export_heatmap(golden, path("g.txt"), HeatmapFormat::kText);
    expect(read_file_bytes(path("g.pgm")) == read_file_bytes(dir + "/heatmap_3x3.pgm"), "P5 golden bytes");
    expect(read_file_bytes(path("g.pgm.bounds")) == read_file_bytes(dir + "/heatmap_3x3.pgm.bounds"),
           "P5 bounds golden bytes");
    expect(read_file_bytes(path("g.txt")) == read_file_bytes(dir + "/heatmap_3x3.txt"), "text golden bytes");
    expect(decode_heatmap_text(read_file_bytes(path("g.txt"))) == golden, "text heatmap round trip");
    fs::remove_all(root);

    std::string detail = "runs, round trips and golden bytes match";
    if (!failures.empty()) {
        detail = std::to_string(failures.size()) + " mismatches, first: " + failures.front();
    }
    return {failures.empty(), detail};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "gradient correctness", criterion_gradients},
        {2, "oracle equivalence", criterion_oracles},
        {3, "masking contract", criterion_masking},
        {4, "attention masking", criterion_attention},
        {5, "rollout", criterion_rollout},
        {6, "pretraining learns", criterion_pretraining},
        {7, "spatial-signal separation", criterion_spatial},
        {8, "pretraining benefit", criterion_benefit},
        {9, "evaluation-coverage trend", criterion_coverage},
        {10, "determinism and serialization", criterion_determinism},
    };
    std::set<int> chosen;
    for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));

    bool all_pass = true;
    for (const Criterion& c : all) {
        if (!chosen.empty() && !chosen.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double budget = kBudget[c.id];
        if (budget > 0.0 && secs >= budget) {
            o.pass = false;
            o.detail += "; over the " + fmt("%g", budget) + " s budget";
        }
        all_pass = all_pass && o.pass;
        std::printf("criterion %2d %-30s %s  %s  [%.1f s]\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    secs);
        std::fflush(stdout);
    }
    return all_pass ? 0 : 1;
}
