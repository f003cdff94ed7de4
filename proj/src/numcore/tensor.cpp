// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/numcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "maskhit/error.hpp"

namespace maskhit {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void check_extents(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
    for (std::size_t e : shape) {
        if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    check_extents(shape_);
    if (data_.size() != shape_size(shape_)) {
        throw ShapeError("value count " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(shape_));
    }
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor truncated_normal(Shape shape, double std, Rng& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : t.values()) {
        double z;
        do {
            z = normal(rng);
        } while (std::abs(z) > 2.0);
        v = z * std;
    }
    return t;
}

void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate) {
    if (!accumulate) std::fill(out, out + m * p, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out + i * p;
        const double* arow = a + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = b + kk * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate) {
    // Transpose b once so the inner loop streams contiguous rows.
    std::vector<double> bt(k * p);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t kk = 0; kk < k; ++kk) bt[kk * p + j] = b[j * k + kk];
    }
    gemm_nn(a, bt.data(), out, m, k, p, accumulate);
}

void gemm_tn(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate) {
    if (!accumulate) std::fill(out, out + k * p, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        const double* arow = a + r * k;
        const double* brow = b + r * p;
        for (std::size_t i = 0; i < k; ++i) {
            const double av = arow[i];
            double* orow = out + i * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
    }
}

}  // namespace maskhit
