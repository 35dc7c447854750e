// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "sarcd/errors.hpp"
#include "sarcd/raster.hpp"

namespace sarcd {

namespace detail {

class PgmReader {
public:
    explicit PgmReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    size_t pos() const { return pos_; }
    bool eof() const { return pos_ >= bytes_.size(); }

    uint8_t byte() {
        if (eof()) throw ParseError("PGM: truncated file", pos_);
        return static_cast<uint8_t>(bytes_[pos_++]);
    }

    /// Skips whitespace and '#' comments between header tokens.
    void skip_separators() {
        while (!eof()) {
            char c = bytes_[pos_];
            if (c == '#') {
                while (!eof() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long token_int(const char* what) {
        skip_separators();
        const size_t start = pos_;
        long value = 0;
        bool any = false;
        while (!eof() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1000000000L) throw ParseError(std::string("PGM: ") + what + " out of range", start);
            ++pos_;
            any = true;
        }
        if (!any) throw ParseError(std::string("PGM: expected ") + what, start);
        return value;
    }

private:
    std::vector<char> bytes_;
    size_t pos_ = 0;
};

} // namespace detail

/// Loads a P2 (ASCII) or P5 (binary) PGM. Samples above 255 use the
/// big-endian two-byte encoding. If maxval_out is given it receives the
/// header maxval.
inline Raster load_pgm(const std::string& path, int* maxval_out = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_pgm: cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    detail::PgmReader in(std::move(bytes));
    const uint8_t m0 = in.byte();
    const uint8_t m1 = in.byte();
    if (m0 != 'P' || (m1 != '2' && m1 != '5'))
        throw ParseError("PGM: unsupported magic", 0);
    const bool binary = m1 == '5';

    const long width = in.token_int("width");
    const long height = in.token_int("height");
    const long maxval = in.token_int("maxval");
    if (width <= 0 || height <= 0)
        throw ParseError("PGM: non-positive dimensions", in.pos());
    if (maxval <= 0 || maxval > 65535)
        throw ParseError("PGM: maxval must be in [1, 65535]", in.pos());

    const size_t count = static_cast<size_t>(width) * static_cast<size_t>(height);
    std::vector<double> samples(count);

    if (binary) {
        in.byte(); // single separator byte after maxval
        const bool wide = maxval > 255;
        for (size_t i = 0; i < count; ++i) {
            const size_t at = in.pos();
            long v = in.byte();
            if (wide) v = (v << 8) | in.byte();
            if (v > maxval) throw ParseError("PGM: sample exceeds maxval", at);
            samples[i] = static_cast<double>(v);
        }
    } else {
        for (size_t i = 0; i < count; ++i) {
            const size_t at = in.pos();
            const long v = in.token_int("sample");
            if (v > maxval) throw ParseError("PGM: sample exceeds maxval", at);
            samples[i] = static_cast<double>(v);
        }
    }

    if (maxval_out) *maxval_out = static_cast<int>(maxval);
    return Raster(static_cast<int>(width), static_cast<int>(height), std::move(samples));
}

/// Writes a binary (P5) PGM. Samples must already lie in [0, maxval]; they
/// are rounded to the nearest integer on write.
inline void save_pgm(const Raster& r, const std::string& path, int maxval) {
    if (maxval <= 0 || maxval > 65535)
        throw std::invalid_argument("save_pgm: maxval must be in [1, 65535]");
    for (size_t i = 0; i < r.size(); ++i) {
        if (!(r[i] >= 0.0 && r[i] <= static_cast<double>(maxval)))
            throw std::invalid_argument("save_pgm: sample " + std::to_string(i) +
                                        " outside [0, maxval]");
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_pgm: cannot open " + path);
    f << "P5\n" << r.width() << " " << r.height() << "\n" << maxval << "\n";

    const bool wide = maxval > 255;
    std::vector<char> payload;
    payload.reserve(r.size() * (wide ? 2 : 1));
    for (size_t i = 0; i < r.size(); ++i) {
        const long v = std::lround(r[i]);
        if (wide) payload.push_back(static_cast<char>((v >> 8) & 0xff));
        payload.push_back(static_cast<char>(v & 0xff));
    }
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!f) throw IoError("save_pgm: write failed for " + path);
}

/// Linearly rescales arbitrary samples to [0, maxval] and writes a PGM.
/// Returns {offset, scale} used, with value_file = (value - offset) * scale.
/// A constant raster is written as all zeros with scale 0.
inline std::pair<double, double> save_pgm_rescaled(const Raster& r, const std::string& path,
                                                   int maxval = 65535) {
    const double lo = r.min(), hi = r.max();
    Raster scaled(r.width(), r.height());
    double scale = 0.0;
    if (hi > lo) {
        scale = static_cast<double>(maxval) / (hi - lo);
        for (size_t i = 0; i < r.size(); ++i) scaled[i] = (r[i] - lo) * scale;
    }
    save_pgm(scaled, path, maxval);
    return {lo, scale};
}

} // namespace sarcd
