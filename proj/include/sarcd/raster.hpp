// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sarcd/errors.hpp"

namespace sarcd {

/// Mirror (symmetric) boundary fold: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
/// Handles offsets of arbitrary magnitude by repeated reflection.
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

/// Single-channel image: row-major doubles, width = columns, height = rows.
class Raster {
public:
    Raster() = default;

    Raster(int width, int height, double fill = 0.0)
        : width_(width), height_(height),
          samples_(static_cast<size_t>(check_dims(width, height)), fill) {}

    Raster(int width, int height, std::vector<double> samples)
        : width_(width), height_(height), samples_(std::move(samples)) {
        check_dims(width, height);
        if (samples_.size() != static_cast<size_t>(width_) * height_)
            throw std::invalid_argument("Raster: sample count does not match dimensions");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    size_t size() const { return samples_.size(); }

    double& at(int row, int col) { return samples_[static_cast<size_t>(row) * width_ + col]; }
    double at(int row, int col) const { return samples_[static_cast<size_t>(row) * width_ + col]; }

    /// Read with mirror padding for out-of-range coordinates.
    double at_reflect(int row, int col) const {
        return at(reflect_index(row, height_), reflect_index(col, width_));
    }

    double& operator[](size_t i) { return samples_[i]; }
    double operator[](size_t i) const { return samples_[i]; }

    std::vector<double>& samples() { return samples_; }
    const std::vector<double>& samples() const { return samples_; }

    bool same_dims(const Raster& o) const { return width_ == o.width_ && height_ == o.height_; }

    double min() const { return *std::min_element(samples_.begin(), samples_.end()); }
    double max() const { return *std::max_element(samples_.begin(), samples_.end()); }

    double mean() const {
        double s = 0.0;
        for (double v : samples_) s += v;
        return s / static_cast<double>(samples_.size());
    }

    bool is_constant() const {
        for (double v : samples_)
            if (v != samples_[0]) return false;
        return true;
    }

    bool all_finite() const {
        for (double v : samples_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    static long long check_dims(int width, int height) {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("Raster: dimensions must be positive");
        return static_cast<long long>(width) * height;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> samples_;
};

/// Square odd-sized convolution kernel.
struct Kernel {
    int size = 1;                 // eta, odd
    std::vector<double> weights;  // size x size, row-major

    Kernel() : weights(1, 1.0) {}

    Kernel(int size_, std::vector<double> weights_)
        : size(size_), weights(std::move(weights_)) {
        if (size <= 0 || size % 2 == 0)
            throw std::invalid_argument("Kernel: size must be odd and positive");
        if (weights.size() != static_cast<size_t>(size) * size)
            throw std::invalid_argument("Kernel: weight count does not match size");
    }

    double at(int row, int col) const { return weights[static_cast<size_t>(row) * size + col]; }

    double sum() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }

    /// Scales the weights to unit sum.
    void normalize() {
        double s = sum();
        if (s == 0.0) throw std::invalid_argument("Kernel: cannot normalize zero-sum kernel");
        for (double& w : weights) w /= s;
    }
};

/// 2-D convolution (kernel flipped) with mirror-padded borders. Output has
/// the same dimensions as the input.
inline Raster convolve2d(const Raster& r, const Kernel& k) {
    const int h = r.height(), w = r.width();
    const int half = k.size / 2;
    Raster out(w, h);
#pragma omp parallel for if (static_cast<long long>(h) * w > 16384)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int ky = -half; ky <= half; ++ky) {
                const int sy = reflect_index(y - ky, h);
                for (int kx = -half; kx <= half; ++kx) {
                    const int sx = reflect_index(x - kx, w);
                    acc += r.at(sy, sx) * k.at(ky + half, kx + half);
                }
            }
            out.at(y, x) = acc;
        }
    }
    return out;
}

/// Affine rescale to zero mean and unit (population) standard deviation.
inline Raster standardize(const Raster& r) {
    if (r.is_constant())
        throw DegenerateInputError("standardize: raster is constant");
    const double mu = r.mean();
    double var = 0.0;
    for (double v : r.samples()) {
        const double d = v - mu;
        var += d * d;
    }
    var /= static_cast<double>(r.size());
    const double inv_sigma = 1.0 / std::sqrt(var);
    Raster out(r.width(), r.height());
    for (size_t i = 0; i < r.size(); ++i) out[i] = (r[i] - mu) * inv_sigma;
    return out;
}

} // namespace sarcd
