// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "sarcd/errors.hpp"
#include "sarcd/raster.hpp"
#include "sarcd/rng.hpp"

namespace sarcd {

/// Parameters of a synthetic bi-temporal speckled scene.
struct SceneSpec {
    int width = 256;
    int height = 256;
    double changed_fraction = 0.01; // target |mask| / area, hit within +-20%
    int blob_count = 20;            // maximum number of change blobs
    double blob_radius_min = 3.0;
    double blob_radius_max = 8.0;
    double looks = 4.0;   // speckle looks L
    double contrast = 3.0; // reflectivity multiplier inside the mask
    uint64_t seed = 1;

    void validate() const {
        if (width < 8 || height < 8) throw std::invalid_argument("SceneSpec: scene too small");
        if (!(changed_fraction > 0.0 && changed_fraction < 0.5))
            throw std::invalid_argument("SceneSpec: changed_fraction must be in (0, 0.5)");
        if (blob_count < 1) throw std::invalid_argument("SceneSpec: blob_count must be >= 1");
        if (blob_radius_min < 0.0 || blob_radius_max < blob_radius_min)
            throw std::invalid_argument("SceneSpec: bad blob radius range");
        if (looks < 1.0) throw std::invalid_argument("SceneSpec: looks must be >= 1");
        if (contrast == 1.0) throw std::invalid_argument("SceneSpec: contrast must differ from 1");
    }
};

struct Scene {
    Raster reflectivity1;
    Raster reflectivity2;
    Raster mask; // {0, 1}
};

namespace detail {

/// Smooth background reflectivity in [0.2, 1.0]: bilinear interpolation of a
/// coarse lattice of counter-indexed uniforms.
inline Raster background_field(const SceneSpec& spec) {
    constexpr int kCell = 32;
    const int gx = spec.width / kCell + 2;
    const int gy = spec.height / kCell + 2;
    std::vector<double> lattice(static_cast<size_t>(gx) * gy);
    for (int j = 0; j < gy; ++j)
        for (int i = 0; i < gx; ++i) {
            SplitMix64 rng(derive_seed(spec.seed, 0xb6ull + static_cast<uint64_t>(j) * gx + i));
            lattice[static_cast<size_t>(j) * gx + i] = rng.next_double();
        }

    Raster out(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const double fx = static_cast<double>(x) / kCell;
            const double fy = static_cast<double>(y) / kCell;
            const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
            const double tx = fx - ix, ty = fy - iy;
            const double v00 = lattice[static_cast<size_t>(iy) * gx + ix];
            const double v01 = lattice[static_cast<size_t>(iy) * gx + ix + 1];
            const double v10 = lattice[static_cast<size_t>(iy + 1) * gx + ix];
            const double v11 = lattice[static_cast<size_t>(iy + 1) * gx + ix + 1];
            const double v = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                             ty * ((1 - tx) * v10 + tx * v11);
            out.at(y, x) = 0.2 + 0.8 * v;
        }
    return out;
}

} // namespace detail

/// Builds the scene triplet: a smooth background reflectivity, a disk-union
/// change mask whose coverage lands within +-20% of the requested fraction,
/// and the second-date reflectivity with the contrast applied inside the
/// mask.
inline Scene gen_scene(const SceneSpec& spec) {
    spec.validate();
    const double area = static_cast<double>(spec.width) * spec.height;
    const double target = spec.changed_fraction * area;
    const double lo = 0.8 * target, hi = 1.2 * target;

    Raster mask(spec.width, spec.height, 0.0);
    SplitMix64 rng(derive_seed(spec.seed, 0x6d61736bull));
    long count = 0;
    int blobs = 0;
    constexpr int kMaxAttempts = 4096;
    for (int attempt = 0; attempt < kMaxAttempts && count < lo && blobs < spec.blob_count;
         ++attempt) {
        const double cx = rng.uniform(0.0, spec.width);
        const double cy = rng.uniform(0.0, spec.height);
        const double r = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
        // Count the fresh pixels this disk would add.
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
        const int x1 = std::min(spec.width - 1, static_cast<int>(std::ceil(cx + r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
        const int y1 = std::min(spec.height - 1, static_cast<int>(std::ceil(cy + r)));
        std::vector<size_t> fresh;
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - cx, dy = y - cy;
                if (dx * dx + dy * dy <= r * r && mask.at(y, x) == 0.0)
                    fresh.push_back(static_cast<size_t>(y) * spec.width + x);
            }
        if (count + static_cast<long>(fresh.size()) > hi) continue; // would overshoot
        for (size_t p : fresh) mask[p] = 1.0;
        count += static_cast<long>(fresh.size());
        ++blobs;
    }
    if (count < lo || count > hi)
        throw GenerationError("gen_scene: could not reach the requested changed fraction (got " +
                              std::to_string(count) + " pixels, want [" +
                              std::to_string(static_cast<long>(lo)) + ", " +
                              std::to_string(static_cast<long>(hi)) + "])");

    Scene scene{detail::background_field(spec), Raster(spec.width, spec.height), std::move(mask)};
    for (size_t p = 0; p < scene.reflectivity1.size(); ++p)
        scene.reflectivity2[p] =
            scene.mask[p] > 0.0 ? scene.reflectivity1[p] * spec.contrast : scene.reflectivity1[p];
    return scene;
}

/// Multi-look intensity speckle: each pixel is multiplied by an independent
/// unit-mean Gamma draw with shape L. Pixel streams are counter-indexed, so
/// the result does not depend on evaluation order.
inline Raster speckle(const Raster& reflectivity, double looks, uint64_t seed) {
    if (looks < 1.0) throw std::invalid_argument("speckle: looks must be >= 1");
    Raster out(reflectivity.width(), reflectivity.height());
    const long long n = static_cast<long long>(out.size());
#pragma omp parallel for if (n > 16384)
    for (long long p = 0; p < n; ++p) {
        SplitMix64 rng(derive_seed(seed, 0x73706bull + static_cast<uint64_t>(p) * 2654435761ull));
        const double g = gamma_draw(rng, looks) / looks;
        out[static_cast<size_t>(p)] = reflectivity[static_cast<size_t>(p)] * g;
    }
    return out;
}

inline nlohmann::json scene_spec_to_json(const SceneSpec& s) {
    return nlohmann::json{{"width", s.width},
                          {"height", s.height},
                          {"changed_fraction", s.changed_fraction},
                          {"blob_count", s.blob_count},
                          {"blob_radius_min", s.blob_radius_min},
                          {"blob_radius_max", s.blob_radius_max},
                          {"looks", s.looks},
                          {"contrast", s.contrast},
                          {"seed", s.seed}};
}

} // namespace sarcd
