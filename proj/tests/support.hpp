// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the unit tests and the acceptance binary.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "maskhit/featstore/sampling.hpp"
#include "maskhit/numcore/graph.hpp"

namespace maskhit::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> n(0.0, scale);
    for (double& v : t.values()) v = n(rng);
    return t;
}

/// Denominator floor for whole-network checks. Some gradients are exactly zero
/// (key biases cannot move a softmax) and central differences then return
/// rounding noise near 1e-10.
inline constexpr double kPipelineGradFloor = 1e-5;

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Builds a scalar from variable leaves; re-run for every perturbation.
using ScalarFn = std::function<Var(Graph&, const std::vector<Var>&)>;

/// Worst relative error between backprop and central differences (step h)
/// over every entry of every input.
inline double max_grad_error(const ScalarFn& f, std::vector<Tensor> inputs, double h = 1e-5, double floor = 1e-6) {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(g.variable(t));
    g.backward(f(g, vars));
    std::vector<Tensor> analytic;
    for (Var v : vars) analytic.push_back(g.grad(v));

    auto eval = [&]() {
        Graph e;
        std::vector<Var> vs;
        for (const Tensor& t : inputs) vs.push_back(e.constant(t));
        return e.value(f(e, vs)).item();
    };
    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double orig = inputs[k][i];
            inputs[k][i] = orig + h;
            const double up = eval();
            inputs[k][i] = orig - h;
            const double down = eval();
            inputs[k][i] = orig;
            worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * h), floor));
        }
    }
    return worst;
}

/// Loss built from named parameters held in a ParamMap.
using ParamLossFn = std::function<Var(Graph&)>;

struct ParamProbe {
    std::string name;
    std::size_t index = 0;
};

/// Worst relative error between backprop and central differences over the
/// given parameter entries. `loss` must read `params` afresh on every call.
inline double max_param_grad_error(ParamMap& params, const ParamLossFn& loss, const std::vector<ParamProbe>& probes,
                                   double h = 1e-5, double floor = kPipelineGradFloor) {
    Graph g;
    g.backward(loss(g));
    const ParamMap grads = g.parameter_grads();
    double worst = 0.0;
    for (const ParamProbe& p : probes) {
        Tensor& t = params.at(p.name);
        const double orig = t[p.index];
        t[p.index] = orig + h;
        Graph up;
        const double lu = up.value(loss(up)).item();
        t[p.index] = orig - h;
        Graph down;
        const double ld = down.value(loss(down)).item();
        t[p.index] = orig;
        const auto it = grads.find(p.name);
        const double analytic = it == grads.end() ? 0.0 : it->second[p.index];
        worst = std::max(worst, relative_error(analytic, (lu - ld) / (2.0 * h), floor));
    }
    return worst;
}

/// `count` random (name, index) probes over every entry of `params`.
inline std::vector<ParamProbe> random_probes(const ParamMap& params, std::size_t count, Rng& rng) {
    std::size_t total = 0;
    for (const auto& [name, t] : params) total += t.size();
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    std::vector<ParamProbe> out;
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t flat = pick(rng);
        for (const auto& [name, t] : params) {
            if (flat < t.size()) {
                out.push_back({name, flat});
                break;
            }
            flat -= t.size();
        }
    }
    return out;
}

/// Region of side n with the given background flags and random features.
inline RegionTensor random_region(std::size_t n, std::size_t d, const std::vector<std::uint8_t>& background, Rng& rng) {
    RegionTensor r;
    r.side = n;
    r.features = random_tensor({n * n, d}, rng);
    r.background = background;
    for (std::size_t j = 0; j < n * n; ++j) {
        r.positions.push_back(GridPos{static_cast<std::uint16_t>(j % n), static_cast<std::uint16_t>(j / n)});
        if (background[j]) {
            for (std::size_t c = 0; c < d; ++c) r.features.at(j, c) = 0.0;
        }
    }
    return r;
}

/// Random background flags with at least one foreground cell.
inline std::vector<std::uint8_t> random_background(std::size_t cells, double fraction, Rng& rng) {
    std::bernoulli_distribution bg(fraction);
    std::vector<std::uint8_t> flags(cells);
    for (auto& f : flags) f = bg(rng) ? 1 : 0;
    if (std::all_of(flags.begin(), flags.end(), [](std::uint8_t f) { return f != 0; })) {
        flags[std::uniform_int_distribution<std::size_t>(0, cells - 1)(rng)] = 0;
    }
    return flags;
}

}  // namespace maskhit::testing
