// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sarcd {

/// File could not be decoded; message carries the byte offset where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, size_t offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    size_t offset() const { return offset_; }

private:
    size_t offset_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input is structurally valid but carries no usable signal (e.g. a constant
/// raster fed to a contrast-dependent operation).
class DegenerateInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Synthetic scene generation could not satisfy the requested constraints.
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pipeline cannot continue: the clustering produced no minority-class pixels.
class EmptyMinorityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sarcd
