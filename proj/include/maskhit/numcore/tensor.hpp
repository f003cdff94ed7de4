// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace maskhit {

using Shape = std::vector<std::size_t>;

/// Caller-owned random stream. Every stochastic routine takes one by reference.
using Rng = std::mt19937_64;

/// Independent stream `stream` of a run seeded with `seed`.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
        return Tensor({rows, cols}, std::move(values));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    bool empty() const noexcept { return data_.empty(); }

    /// Extent of the last axis.
    std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
    /// Product of all extents except the last.
    std::size_t rows() const noexcept { return cols() == 0 ? 0 : data_.size() / cols(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    /// Same values under a new shape of equal size.
    Tensor reshaped(Shape shape) const;
    double item() const;

    bool all_finite() const noexcept;
    void fill(double v);

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Normal draws truncated at two standard deviations (resampled outside).
Tensor truncated_normal(Shape shape, double std, Rng& rng);

// Raw kernels shared by the graph ops and their backward passes. All are row-major.
// out[m x p] (+)= a[m x k] * b[k x p]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate);
// out[m x p] (+)= a[m x k] * b[p x k]^T
void gemm_nt(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate);
// out[k x p] (+)= a[m x k]^T * b[m x p]
void gemm_tn(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate);

}  // namespace maskhit
