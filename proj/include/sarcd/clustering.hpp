// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "sarcd/features.hpp"
#include "sarcd/raster.hpp"
#include "sarcd/rng.hpp"

namespace sarcd {

/// Fuzzy membership matrix for two clusters: u[c * n + i], columns sum to 1.
struct Membership {
    int clusters = 2;
    int n = 0;
    std::vector<double> u;

    Membership() = default;
    Membership(int clusters_, int n_) : clusters(clusters_), n(n_),
        u(static_cast<size_t>(clusters_) * n_, 0.0) {}

    double at(int c, int i) const { return u[static_cast<size_t>(c) * n + i]; }
    double& at(int c, int i) { return u[static_cast<size_t>(c) * n + i]; }
};

/// Converged clustering state: centres, their anchors and the objective
/// history.
struct ClusterModel {
    int clusters = 2;
    int dim = 0;
    std::vector<double> centres;      // clusters x dim
    std::vector<double> pre_centres;  // clusters x dim (zeros when unconstrained)
    std::array<double, 2> beta{0.0, 0.0};
    double fuzzifier = 2.0;
    std::vector<double> objective_trace;
    int iterations = 0;

    std::span<const double> centre(int c) const {
        return {centres.data() + static_cast<size_t>(c) * dim, static_cast<size_t>(dim)};
    }
};

struct FcmOptions {
    double fuzzifier = 2.0;
    double tol = 1e-6;
    int max_iter = 100;
};

struct FcmResult {
    Membership membership;
    ClusterModel model;
};

namespace detail {

constexpr int kClusters = 2;

/// Squared distance between sample i and centre c using the anchored sample
/// (1-beta_c) x + beta_c pre_c. beta_c == 0 takes the plain-FCM path so the
/// unconstrained trajectory is reproduced bit for bit.
inline double anchored_dist_sq(const double* x, int dim, const double* centre, const double* pre,
                               double beta) {
    double d = 0.0;
    if (beta == 0.0) {
        for (int k = 0; k < dim; ++k) {
            const double t = x[k] - centre[k];
            d += t * t;
        }
    } else {
        for (int k = 0; k < dim; ++k) {
            const double t = (1.0 - beta) * x[k] + beta * pre[k] - centre[k];
            d += t * t;
        }
    }
    return d;
}

/// Membership update. A sample whose anchored image coincides with a centre
/// gets crisp membership for the first such cluster.
inline void update_membership(const double* x, int n, int dim, const std::vector<double>& centres,
                              const std::vector<double>& pre,
                              const std::array<double, 2>& beta, double m, Membership& u) {
    const double expo = 1.0 / (m - 1.0);
    for (int i = 0; i < n; ++i) {
        const double* xi = x + static_cast<size_t>(i) * dim;
        double d[kClusters];
        int zero = -1;
        for (int c = 0; c < kClusters; ++c) {
            d[c] = anchored_dist_sq(xi, dim, centres.data() + static_cast<size_t>(c) * dim,
                                    pre.data() + static_cast<size_t>(c) * dim, beta[c]);
            if (zero < 0 && d[c] == 0.0) zero = c;
        }
        if (zero >= 0) {
            for (int c = 0; c < kClusters; ++c) u.at(c, i) = (c == zero) ? 1.0 : 0.0;
            continue;
        }
        double w[kClusters];
        double wsum = 0.0;
        bool overflow = false;
        for (int c = 0; c < kClusters; ++c) {
            w[c] = std::pow(d[c], -expo);
            if (!std::isfinite(w[c])) overflow = true;
            wsum += w[c];
        }
        if (overflow || wsum == 0.0 || !std::isfinite(wsum)) {
            const int nearest = d[0] <= d[1] ? 0 : 1;
            for (int c = 0; c < kClusters; ++c) u.at(c, i) = (c == nearest) ? 1.0 : 0.0;
            continue;
        }
        for (int c = 0; c < kClusters; ++c) u.at(c, i) = w[c] / wsum;
    }
}

/// Centre update: the anchored convex combination of the fuzzy weighted mean
/// with the pre-centre. Empty clusters keep their previous centre.
inline void update_centres(const double* x, int n, int dim, const Membership& u,
                           const std::vector<double>& pre, const std::array<double, 2>& beta,
                           double m, std::vector<double>& centres) {
    for (int c = 0; c < kClusters; ++c) {
        std::vector<double> num(dim, 0.0);
        double den = 0.0;
        for (int i = 0; i < n; ++i) {
            const double um = std::pow(u.at(c, i), m);
            den += um;
            const double* xi = x + static_cast<size_t>(i) * dim;
            for (int k = 0; k < dim; ++k) num[k] += um * xi[k];
        }
        double* vc = centres.data() + static_cast<size_t>(c) * dim;
        if (den <= 0.0) continue;
        const double* pc = pre.data() + static_cast<size_t>(c) * dim;
        if (beta[c] == 0.0) {
            for (int k = 0; k < dim; ++k) vc[k] = num[k] / den;
        } else {
            for (int k = 0; k < dim; ++k)
                vc[k] = (1.0 - beta[c]) * (num[k] / den) + beta[c] * pc[k];
        }
    }
}

inline double objective(const double* x, int n, int dim, const Membership& u,
                        const std::vector<double>& centres, const std::vector<double>& pre,
                        const std::array<double, 2>& beta, double m) {
    double j = 0.0;
    for (int c = 0; c < kClusters; ++c) {
        const double* vc = centres.data() + static_cast<size_t>(c) * dim;
        const double* pc = pre.data() + static_cast<size_t>(c) * dim;
        for (int i = 0; i < n; ++i)
            j += std::pow(u.at(c, i), m) *
                 anchored_dist_sq(x + static_cast<size_t>(i) * dim, dim, vc, pc, beta[c]);
    }
    return j;
}

/// Shared alternating loop. Exits right after a centre update, so the
/// returned centres are the exact fixed-point image of the returned
/// memberships.
inline FcmResult run_fcm_loop(const double* x, int n, int dim, Membership u,
                              std::vector<double> pre, std::array<double, 2> beta,
                              const FcmOptions& opt) {
    FcmResult res;
    res.model.dim = dim;
    res.model.pre_centres = pre;
    res.model.beta = beta;
    res.model.fuzzifier = opt.fuzzifier;
    std::vector<double> centres(static_cast<size_t>(kClusters) * dim, 0.0);
    std::vector<double> prev;

    for (;;) {
        update_centres(x, n, dim, u, pre, beta, opt.fuzzifier, centres);
        ++res.model.iterations;
        res.model.objective_trace.push_back(
            objective(x, n, dim, u, centres, pre, beta, opt.fuzzifier));

        bool converged = false;
        if (!prev.empty()) {
            double shift = 0.0;
            for (size_t k = 0; k < centres.size(); ++k)
                shift = std::max(shift, std::abs(centres[k] - prev[k]));
            converged = shift < opt.tol;
        }
        if (converged || res.model.iterations >= opt.max_iter) break;
        prev = centres;
        update_membership(x, n, dim, centres, pre, beta, opt.fuzzifier, u);
    }
    res.model.centres = std::move(centres);
    res.membership = std::move(u);
    return res;
}

inline void validate_fcm_inputs(const double* x, int n, int dim, const FcmOptions& opt) {
    if (n < kClusters) throw std::invalid_argument("fcm: need at least as many samples as clusters");
    if (dim < 1) throw std::invalid_argument("fcm: dim must be >= 1");
    if (opt.fuzzifier <= 1.0) throw std::invalid_argument("fcm: fuzzifier must be > 1");
    if (opt.tol <= 0.0 || opt.max_iter < 1) throw std::invalid_argument("fcm: bad convergence options");
    bool identical = true;
    for (int i = 1; i < n && identical; ++i)
        for (int k = 0; k < dim; ++k)
            if (x[static_cast<size_t>(i) * dim + k] != x[k]) {
                identical = false;
                break;
            }
    if (identical) throw DegenerateInputError("fcm: all samples are identical");
}

} // namespace detail

/// Standard two-cluster FCM from a seeded random membership matrix.
inline FcmResult fcm(const double* x, int n, int dim, const FcmOptions& opt, uint64_t seed) {
    detail::validate_fcm_inputs(x, n, dim, opt);
    Membership u(detail::kClusters, n);
    SplitMix64 rng(derive_seed(seed, 0xfc3ull));
    for (int i = 0; i < n; ++i) {
        double a = rng.next_double();
        double b = rng.next_double();
        const double s = a + b;
        if (s == 0.0) {
            a = b = 0.5;
        } else {
            a /= s;
            b /= s;
        }
        u.at(0, i) = a;
        u.at(1, i) = b;
    }
    std::vector<double> pre(static_cast<size_t>(detail::kClusters) * dim, 0.0);
    return detail::run_fcm_loop(x, n, dim, std::move(u), std::move(pre), {0.0, 0.0}, opt);
}

/// Standard two-cluster FCM whose initial memberships derive from the given
/// centres through one membership evaluation.
inline FcmResult fcm_from_centres(const double* x, int n, int dim, const FcmOptions& opt,
                                  std::span<const double> centres0) {
    detail::validate_fcm_inputs(x, n, dim, opt);
    if (centres0.size() != static_cast<size_t>(detail::kClusters) * dim)
        throw std::invalid_argument("fcm_from_centres: centre size mismatch");
    std::vector<double> pre(static_cast<size_t>(detail::kClusters) * dim, 0.0);
    std::vector<double> c0(centres0.begin(), centres0.end());
    Membership u(detail::kClusters, n);
    detail::update_membership(x, n, dim, c0, pre, {0.0, 0.0}, opt.fuzzifier, u);
    return detail::run_fcm_loop(x, n, dim, std::move(u), std::move(pre), {0.0, 0.0}, opt);
}

/// Anchor-centre estimation: clusters the feature vectors of the n_p
/// highest-valued and n_p lowest-valued pixels of the difference image, then
/// labels the centre favoured by the high-intensity group as the changed-side
/// anchor. Returns [changed centre | unchanged centre] (2 x dim).
inline std::vector<double> tccfcm_stage1(std::span<const double> di_values,
                                         const FeatureField& features, int n_p,
                                         const FcmOptions& opt, uint64_t seed) {
    const int n = static_cast<int>(di_values.size());
    if (features.samples() != di_values.size())
        throw std::invalid_argument("tccfcm_stage1: feature/DI size mismatch");
    if (n_p < 1 || 2 * n_p > n)
        throw std::invalid_argument("tccfcm_stage1: need 1 <= n_p and 2*n_p <= sample count");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return di_values[a] < di_values[b];
    });

    // High-intensity group first, then the low group.
    const int dim = features.dim;
    std::vector<double> samples(static_cast<size_t>(2 * n_p) * dim);
    for (int i = 0; i < n_p; ++i) {
        const int hi = order[n - 1 - i];
        const int lo = order[i];
        std::copy_n(features.sample(hi), dim, samples.data() + static_cast<size_t>(i) * dim);
        std::copy_n(features.sample(lo), dim,
                    samples.data() + static_cast<size_t>(n_p + i) * dim);
    }

    const FcmResult res = fcm(samples.data(), 2 * n_p, dim, opt, seed);

    double high_mass[2] = {0.0, 0.0};
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < n_p; ++i) high_mass[c] += res.membership.at(c, i);
    int changed = high_mass[0] >= high_mass[1] ? 0 : 1;

    std::vector<double> pre(static_cast<size_t>(2) * dim);
    std::copy_n(res.model.centres.data() + static_cast<size_t>(changed) * dim, dim, pre.data());
    std::copy_n(res.model.centres.data() + static_cast<size_t>(1 - changed) * dim, dim,
                pre.data() + dim);
    return pre;
}

/// Centre-constrained FCM: cluster 1 is anchored to the changed-side
/// pre-centre with strength beta, cluster 2 to the unchanged side with
/// 0.7 * beta. Initial memberships derive from the pre-centres.
inline FcmResult tccfcm_stage2(const double* x, int n, int dim, std::span<const double> pre_centres,
                               double beta, const FcmOptions& opt) {
    detail::validate_fcm_inputs(x, n, dim, opt);
    if (pre_centres.size() != static_cast<size_t>(detail::kClusters) * dim)
        throw std::invalid_argument("tccfcm_stage2: pre-centre size mismatch");
    if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("tccfcm_stage2: beta must be in [0,1]");

    const std::array<double, 2> betas{beta, 0.7 * beta};
    std::vector<double> pre(pre_centres.begin(), pre_centres.end());
    Membership u(detail::kClusters, n);
    detail::update_membership(x, n, dim, pre, pre, betas, opt.fuzzifier, u);
    return detail::run_fcm_loop(x, n, dim, std::move(u), std::move(pre), betas, opt);
}

// ---------------------------------------------------------------------------
// Parallel clustering strategy.
// ---------------------------------------------------------------------------

enum class TernaryLabel : uint8_t { Unchanged = 0, Changed = 1, Hard = 2 };

/// Per-pixel three-way decision map.
struct TernaryMap {
    int width = 0;
    int height = 0;
    std::vector<TernaryLabel> labels;
    long changed = 0, unchanged = 0, hard = 0;

    TernaryLabel at(int row, int col) const {
        return labels[static_cast<size_t>(row) * width + col];
    }

    void recount() {
        changed = unchanged = hard = 0;
        for (TernaryLabel l : labels) {
            if (l == TernaryLabel::Changed) ++changed;
            else if (l == TernaryLabel::Unchanged) ++unchanged;
            else ++hard;
        }
    }
};

/// Averages the two branch decisions: agreement keeps the class, disagreement
/// is deferred to the hard class.
inline TernaryLabel combine_branch_labels(int y1, int y2) {
    const int sum = y1 + y2;
    if (sum == 2) return TernaryLabel::Changed;
    if (sum == 0) return TernaryLabel::Unchanged;
    return TernaryLabel::Hard;
}

/// Crisp per-sample decisions: 1 for samples assigned (by maximum membership)
/// to the cluster whose centre has the larger Euclidean norm.
inline std::vector<uint8_t> crisp_labels(const Membership& u, const ClusterModel& model) {
    double norm_sq[2] = {0.0, 0.0};
    for (int c = 0; c < 2; ++c)
        for (double v : model.centre(c)) norm_sq[c] += v * v;
    const int changed_cluster = norm_sq[0] >= norm_sq[1] ? 0 : 1;
    std::vector<uint8_t> labels(u.n);
    for (int i = 0; i < u.n; ++i) {
        const int assigned = u.at(0, i) >= u.at(1, i) ? 0 : 1;
        labels[i] = assigned == changed_cluster ? 1 : 0;
    }
    return labels;
}

struct ParallelClusterConfig {
    double mu1 = -0.2;
    double mu2 = 0.3;
    int gamma = 6;
    double beta = 0.5;
    int n_p = 0; // 0: max(100, 1% of pixels), capped at half the pixels
    FcmOptions fcm;
    uint64_t seed = 1;
};

struct ParallelClusterResult {
    TernaryMap ternary;
    std::array<std::vector<double>, 2> pre_centres;
    std::array<ClusterModel, 2> models;
};

/// Two sigmoid mappings of the standardized difference image, Gabor features
/// of each, a two-stage constrained clustering per branch, and the label
/// average into {changed, unchanged, hard}.
inline ParallelClusterResult parallel_cluster_full(const Raster& di,
                                                   const ParallelClusterConfig& cfg) {
    const Raster z = standardize(di); // throws DegenerateInputError on constant input
    const int n = static_cast<int>(z.size());

    int n_p = cfg.n_p > 0 ? cfg.n_p : std::max(100, n / 100);
    n_p = std::min(n_p, n / 2);
    if (n_p < 1) throw std::invalid_argument("parallel_cluster: image too small");

    const GaborBank bank = build_gabor_bank(cfg.gamma);

    ParallelClusterResult out;
    std::array<std::vector<uint8_t>, 2> branch;
    for (int j = 0; j < 2; ++j) {
        const Raster mapped = sigmoid_map(z, j == 0 ? cfg.mu1 : cfg.mu2);
        const FeatureField feats = gabor_features(mapped, bank);
        out.pre_centres[j] = tccfcm_stage1(z.samples(), feats, n_p, cfg.fcm,
                                           derive_seed(cfg.seed, 0x5731ull + j));
        FcmResult res =
            tccfcm_stage2(feats.data.data(), n, feats.dim, out.pre_centres[j], cfg.beta, cfg.fcm);
        branch[j] = crisp_labels(res.membership, res.model);
        out.models[j] = std::move(res.model);
    }

    TernaryMap& map = out.ternary;
    map.width = di.width();
    map.height = di.height();
    map.labels.resize(z.size());
    for (int i = 0; i < n; ++i)
        map.labels[i] = combine_branch_labels(branch[0][i], branch[1][i]);
    map.recount();
    return out;
}

inline TernaryMap parallel_cluster(const Raster& di, const ParallelClusterConfig& cfg) {
    return parallel_cluster_full(di, cfg).ternary;
}

} // namespace sarcd
