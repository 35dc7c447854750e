// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sarcd/raster.hpp"
#include "sarcd/superpixel.hpp"

namespace sarcd {

/// Difference-image generation settings.
struct DiConfig {
    int eta = 3;                                  // weighted-average filter size (odd)
    std::vector<int> scales{100, 500, 1000, 2000}; // superpixel counts, reference area 400x400
    std::array<double, 3> alpha{0.3, 0.4, 0.3};   // pixel / median / mean weights
    double epsilon = 1e-6;                        // ratio floor, relative to image max
    double compactness = 0.1;
    int slic_iters = 10;
    int otsu_bins = 256;

    void validate() const {
        if (eta < 1 || eta % 2 == 0) throw std::invalid_argument("DiConfig: eta must be odd and >= 1");
        if (scales.empty()) throw std::invalid_argument("DiConfig: at least one scale required");
        for (size_t i = 1; i < scales.size(); ++i)
            if (scales[i] <= scales[i - 1])
                throw std::invalid_argument("DiConfig: scales must be strictly increasing");
        if (alpha[0] < 0 || alpha[1] < 0 || alpha[2] < 0)
            throw std::invalid_argument("DiConfig: alpha weights must be non-negative");
        if (std::abs(alpha[0] + alpha[1] + alpha[2] - 1.0) > 1e-12)
            throw std::invalid_argument("DiConfig: alpha weights must sum to 1");
        if (epsilon <= 0.0) throw std::invalid_argument("DiConfig: epsilon must be positive");
    }
};

/// Distance-weighted smoothing kernel. Off-centre weights fall off as
/// 1 / (eta^2 * distance-to-centre); the centre weight is 2 / eta^2. The
/// kernel is normalized to unit sum so smoothing preserves intensity scale.
inline Kernel build_weight_kernel(int eta) {
    if (eta < 3 || eta % 2 == 0)
        throw std::invalid_argument("build_weight_kernel: eta must be odd and >= 3");
    const int centre = (eta - 1) / 2; // 0-based
    std::vector<double> w(static_cast<size_t>(eta) * eta);
    for (int i = 0; i < eta; ++i)
        for (int j = 0; j < eta; ++j) {
            const double di = centre - i;
            const double dj = centre - j;
            const double dist = std::sqrt(di * di + dj * dj);
            w[static_cast<size_t>(i) * eta + j] =
                (dist == 0.0) ? 2.0 / (eta * eta) : 1.0 / (eta * eta * dist);
        }
    Kernel k(eta, std::move(w));
    k.normalize();
    return k;
}

inline Raster smooth(const Raster& r, int eta) {
    return convolve2d(r, build_weight_kernel(eta));
}

/// Per-pixel |ln((b + eps) / (a + eps))|. eps is an absolute floor.
inline Raster log_ratio(const Raster& a, const Raster& b, double eps) {
    if (!a.same_dims(b)) throw std::invalid_argument("log_ratio: dimension mismatch");
    if (eps <= 0.0) throw std::invalid_argument("log_ratio: eps must be positive");
    Raster out(a.width(), a.height());
    for (size_t i = 0; i < a.size(); ++i)
        out[i] = std::abs(std::log((b[i] + eps) / (a[i] + eps)));
    return out;
}

/// Convex per-pixel recombination of the raster with its superpixel median
/// and mean: out = a1 * pixel + a2 * median + a3 * mean.
inline Raster reconstruct_sr_di(const Raster& slr, const Segmentation& seg,
                                const std::array<double, 3>& alpha) {
    if (slr.width() != seg.width || slr.height() != seg.height)
        throw std::invalid_argument("reconstruct_sr_di: segmentation/raster size mismatch");
    if (seg.stats.size() != static_cast<size_t>(seg.count))
        throw std::invalid_argument("reconstruct_sr_di: segmentation stats not filled");
    Raster out(slr.width(), slr.height());
    for (size_t p = 0; p < slr.size(); ++p) {
        const SuperpixelStats& s = seg.stats[seg.labels[p]];
        out[p] = alpha[0] * slr[p] + alpha[1] * s.median + alpha[2] * s.mean;
    }
    return out;
}

/// Superpixel counts rescaled from the 400x400 reference area to this image,
/// clamped to [16, pixel count].
inline std::vector<int> effective_scales(const DiConfig& cfg, int width, int height) {
    const double factor = static_cast<double>(width) * height / (400.0 * 400.0);
    const int n = width * height;
    std::vector<int> out;
    out.reserve(cfg.scales.size());
    for (int s : cfg.scales) {
        int k = static_cast<int>(std::lround(s * factor));
        k = std::max(k, 16);
        k = std::min(k, n);
        out.push_back(k);
    }
    return out;
}

namespace detail {

/// Ratio floor used by the difference-image pipeline: relative epsilon times
/// the larger image maximum, falling back to the raw epsilon for all-zero
/// inputs.
inline double ratio_floor(const DiConfig& cfg, const Raster& a, const Raster& b) {
    const double peak = std::max(a.max(), b.max());
    return peak > 0.0 ? cfg.epsilon * peak : cfg.epsilon;
}

/// Contrast raster handed to SLIC: standardized unless constant.
inline Raster segmentation_input(const Raster& slr) {
    return slr.is_constant() ? slr : standardize(slr);
}

} // namespace detail

/// Smoothed inputs -> absolute log-ratio -> smoothed again.
inline Raster compute_slr(const Raster& i1, const Raster& i2, const DiConfig& cfg) {
    cfg.validate();
    if (!i1.same_dims(i2)) throw std::invalid_argument("compute_slr: dimension mismatch");
    const Raster i1w = smooth(i1, cfg.eta);
    const Raster i2w = smooth(i2, cfg.eta);
    const Raster lr = log_ratio(i1w, i2w, detail::ratio_floor(cfg, i1w, i2w));
    return smooth(lr, cfg.eta);
}

/// Multi-scale superpixel-reconstructed difference image: superpixel
/// segmentation of the smoothed log-ratio at each scale, per-scale
/// pixel/median/mean recombination, then the uniform average over scales.
inline Raster msrdi(const Raster& i1, const Raster& i2, const DiConfig& cfg) {
    const Raster slr = compute_slr(i1, i2, cfg);
    const Raster seg_input = detail::segmentation_input(slr);
    const std::vector<int> scales = effective_scales(cfg, slr.width(), slr.height());

    Raster acc(slr.width(), slr.height(), 0.0);
    for (int k : scales) {
        Segmentation seg = slic(seg_input, k, cfg.compactness, cfg.slic_iters);
        superpixel_stats(slr, seg);
        const Raster sr = reconstruct_sr_di(slr, seg, cfg.alpha);
        for (size_t p = 0; p < acc.size(); ++p) acc[p] += sr[p];
    }
    const double inv_t = 1.0 / static_cast<double>(scales.size());
    for (size_t p = 0; p < acc.size(); ++p) acc[p] *= inv_t;
    return acc;
}

/// Otsu threshold over a `bins`-bin histogram spanning [min, max]. Returns
/// the bin edge maximizing between-class variance; ties resolve to the lower
/// edge. Pixels with value > threshold form the upper class.
inline double otsu_threshold(const Raster& r, int bins = 256) {
    if (bins < 2) throw std::invalid_argument("otsu_threshold: bins must be >= 2");
    if (r.is_constant()) throw DegenerateInputError("otsu_threshold: raster is constant");
    const double lo = r.min(), hi = r.max();
    const double width = (hi - lo) / bins;

    std::vector<long> hist(bins, 0);
    for (size_t i = 0; i < r.size(); ++i) {
        int b = static_cast<int>((r[i] - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        ++hist[b];
    }

    const double total = static_cast<double>(r.size());
    double total_mean = 0.0;
    for (int b = 0; b < bins; ++b) total_mean += hist[b] * (b + 0.5);
    total_mean /= total;

    double w0 = 0.0, sum0 = 0.0;
    double best_var = -1.0;
    int best_edge = 0;
    for (int b = 0; b < bins - 1; ++b) { // threshold after bin b
        w0 += hist[b];
        sum0 += hist[b] * (b + 0.5);
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (total_mean * total - sum0) / w1;
        const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best_var) { // strict: ties keep the lower edge
            best_var = var;
            best_edge = b;
        }
    }
    if (best_var < 0.0) throw DegenerateInputError("otsu_threshold: degenerate histogram");
    return lo + (best_edge + 1) * width;
}

} // namespace sarcd
