// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sarcd {

/// Counter-friendly PRNG (SplitMix64). Every stochastic component of the
/// library derives its stream from an explicit seed through this generator,
/// so results are reproducible across runs and independent of the standard
/// library's distribution implementations.
struct SplitMix64 {
    uint64_t state = 0;

    explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

    uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        // Multiply-shift rejection-free mapping; bias is < 2^-53 for the
        // range sizes used here.
        return static_cast<uint64_t>(next_double() * static_cast<double>(n));
    }
};

/// Deterministically derives an independent sub-stream seed.
inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
    SplitMix64 rng(seed ^ (0x9e3779b97f4a7c15ull * (tag + 1)));
    rng.next();
    return rng.next();
}

/// Standard normal draw (Box-Muller, consumes two uniforms).
inline double normal_draw(SplitMix64& rng) {
    double u1 = rng.next_double();
    double u2 = rng.next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Gamma draw with shape >= 1 and unit scale (Marsaglia-Tsang squeeze).
inline double gamma_draw(SplitMix64& rng, double shape) {
    if (shape < 1.0) throw std::invalid_argument("gamma_draw: shape must be >= 1");
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal_draw(rng);
        double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        double v = t * t * t;
        double u = rng.next_double();
        if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

/// k distinct indices drawn uniformly from [0, n), returned in ascending order.
inline std::vector<size_t> sample_without_replacement(size_t n, size_t k, SplitMix64& rng) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<size_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = i;
    // Partial Fisher-Yates: the first k slots end up holding the sample.
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(rng.next_below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

template <typename T>
void shuffle_indices(std::vector<T>& v, SplitMix64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace sarcd
