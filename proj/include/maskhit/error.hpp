// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace maskhit {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { kOther = 1, kConfig = 2, kData = 3, kDivergence = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

/// Raised when no region origin satisfies the foreground constraint.
class NoValidRegion : public DataError {
public:
    explicit NoValidRegion(const std::string& what) : DataError(what) {}
};

/// Non-finite activation, gradient or loss.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error(ErrorKind::kDivergence, what) {}
};

/// Programming errors: shape mismatches, out-of-range indices.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorKind::kOther, what) {}
};

}  // namespace maskhit
