// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sarcd/clustering.hpp"
#include "sarcd/raster.hpp"
#include "sarcd/rng.hpp"

namespace sarcd {

enum class Provenance : uint8_t { Real, Generated };

/// A set of square 2-lambda patches of one pseudo-label class.
struct PatchSet {
    int patch_size = 0; // 2 * lambda
    TernaryLabel cls = TernaryLabel::Unchanged;
    std::vector<std::vector<double>> patches;
    std::vector<std::pair<int, int>> centers; // (row, col); (-1, -1) for generated
    std::vector<Provenance> provenance;

    size_t size() const { return patches.size(); }

    void push(std::vector<double> patch, std::pair<int, int> center, Provenance prov) {
        patches.push_back(std::move(patch));
        centers.push_back(center);
        provenance.push_back(prov);
    }
};

/// Cuts a lambda-row by 2*lambda-column window centred on (row, col) from
/// each raster and stacks them vertically (first raster on top) into one
/// 2*lambda x 2*lambda patch. Windows reaching past the border mirror.
inline std::vector<double> extract_patch(const Raster& i1, const Raster& i2, int row, int col,
                                         int lambda) {
    if (!i1.same_dims(i2)) throw std::invalid_argument("extract_patch: dimension mismatch");
    if (lambda < 1) throw std::invalid_argument("extract_patch: lambda must be >= 1");
    const int side = 2 * lambda;
    const int row0 = row - lambda / 2;
    const int col0 = col - lambda;
    std::vector<double> patch(static_cast<size_t>(side) * side);
    for (int r = 0; r < lambda; ++r)
        for (int c = 0; c < side; ++c) {
            patch[static_cast<size_t>(r) * side + c] = i1.at_reflect(row0 + r, col0 + c);
            patch[static_cast<size_t>(r + lambda) * side + c] = i2.at_reflect(row0 + r, col0 + c);
        }
    return patch;
}

struct PseudoSets {
    PatchSet changed, unchanged, hard;
    long n1() const { return static_cast<long>(changed.size()); }
    long n2() const { return static_cast<long>(unchanged.size()); }
    long nh() const { return static_cast<long>(hard.size()); }
};

/// One patch per pixel, routed by the pixel's ternary label. Hard patches
/// keep raster scan order so classifier outputs can be zipped back onto the
/// map. Aborts when the clustering found no changed pixels at all.
inline PseudoSets build_pseudo_sets(const TernaryMap& ternary, const Raster& i1, const Raster& i2,
                                    int lambda) {
    if (ternary.width != i1.width() || ternary.height != i1.height())
        throw std::invalid_argument("build_pseudo_sets: map/raster size mismatch");
    if (ternary.changed == 0)
        throw EmptyMinorityError(
            "build_pseudo_sets: clustering produced no changed pixels; nothing to learn from");

    PseudoSets out;
    out.changed.cls = TernaryLabel::Changed;
    out.unchanged.cls = TernaryLabel::Unchanged;
    out.hard.cls = TernaryLabel::Hard;
    out.changed.patch_size = out.unchanged.patch_size = out.hard.patch_size = 2 * lambda;
    out.changed.patches.reserve(ternary.changed);
    out.unchanged.patches.reserve(ternary.unchanged);
    out.hard.patches.reserve(ternary.hard);

    for (int r = 0; r < ternary.height; ++r)
        for (int c = 0; c < ternary.width; ++c) {
            PatchSet* dst = nullptr;
            switch (ternary.at(r, c)) {
                case TernaryLabel::Changed: dst = &out.changed; break;
                case TernaryLabel::Unchanged: dst = &out.unchanged; break;
                case TernaryLabel::Hard: dst = &out.hard; break;
            }
            dst->push(extract_patch(i1, i2, r, c, lambda), {r, c}, Provenance::Real);
        }
    return out;
}

struct BalancedSets {
    PatchSet changed, unchanged;
    std::vector<int> labels; // 1 for the changed block, then 0 for the unchanged block
};

/// Produces `count` generated patches of the given side length.
using PatchGenerator = std::function<PatchSet(int count, uint64_t seed)>;

/// Balances the two pseudo-label classes at n_t patches each: the changed set
/// is topped up with generated patches, the unchanged set is uniformly
/// subsampled (seeded, without replacement, ascending index order).
inline BalancedSets balance_sets(const PatchSet& changed, const PatchSet& unchanged,
                                 const PatchGenerator& generate, int n_t, uint64_t seed) {
    const int n1 = static_cast<int>(changed.size());
    const int n2 = static_cast<int>(unchanged.size());
    if (n_t < n1) throw std::invalid_argument("balance_sets: n_t must be >= changed count");
    if (n_t > n2) throw std::invalid_argument("balance_sets: n_t exceeds unchanged count");

    BalancedSets out;
    out.changed = changed;
    if (n_t > n1) {
        const PatchSet fake = generate(n_t - n1, derive_seed(seed, 0x67616eull));
        if (static_cast<int>(fake.size()) != n_t - n1 || fake.patch_size != changed.patch_size)
            throw std::invalid_argument("balance_sets: generator returned wrong patches");
        for (size_t i = 0; i < fake.size(); ++i)
            out.changed.push(fake.patches[i], {-1, -1}, Provenance::Generated);
    }

    SplitMix64 rng(derive_seed(seed, 0x737562ull));
    const std::vector<size_t> keep =
        sample_without_replacement(static_cast<size_t>(n2), static_cast<size_t>(n_t), rng);
    out.unchanged.cls = unchanged.cls;
    out.unchanged.patch_size = unchanged.patch_size;
    for (size_t idx : keep)
        out.unchanged.push(unchanged.patches[idx], unchanged.centers[idx],
                           unchanged.provenance[idx]);

    out.labels.assign(static_cast<size_t>(n_t), 1);
    out.labels.resize(static_cast<size_t>(2) * n_t, 0);
    return out;
}

} // namespace sarcd
