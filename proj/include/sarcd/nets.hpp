// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarcd/nn.hpp"
#include "sarcd/rng.hpp"
#include "sarcd/sampling.hpp"

namespace sarcd {

namespace detail {

/// Packs the selected patches into an (n, 1, side, side) tensor.
inline Tensor4 patches_to_tensor(const PatchSet& set, const std::vector<size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("patches_to_tensor: empty selection");
    const int side = set.patch_size;
    Tensor4 t(static_cast<int>(indices.size()), 1, side, side);
    for (size_t i = 0; i < indices.size(); ++i) {
        const auto& p = set.patches[indices[i]];
        if (p.size() != static_cast<size_t>(side) * side)
            throw std::invalid_argument("patches_to_tensor: inconsistent patch size");
        std::copy(p.begin(), p.end(), t.sample(static_cast<int>(i)));
    }
    return t;
}

inline Tensor4 flatten(const Tensor4& x) {
    Tensor4 out(x.n, static_cast<int>(x.sample_size()), 1, 1);
    out.v = x.v;
    return out;
}

inline Tensor4 reshape(const Tensor4& x, int c, int h, int w) {
    Tensor4 out(x.n, c, h, w);
    if (out.numel() != x.numel()) throw std::invalid_argument("reshape: element count mismatch");
    out.v = x.v;
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// CWNN: convolutional classifier whose pooling stages keep the Haar LL
// subband. Accepts (n, 1, side, side) patches with side divisible by 4.
// ---------------------------------------------------------------------------

class CwnnModel {
public:
    explicit CwnnModel(int patch_side = 28)
        : patch_side_(patch_side),
          conv1_("cwnn.conv1", 1, 16, 5, 1, 2),
          conv2_("cwnn.conv2", 16, 32, 5, 1, 2),
          fc_("cwnn.fc", 32 * (patch_side / 4) * (patch_side / 4), 2) {
        if (patch_side < 4 || patch_side % 4 != 0)
            throw std::invalid_argument("CwnnModel: patch side must be a positive multiple of 4");
    }

    int patch_side() const { return patch_side_; }

    std::vector<ParamTensor*> params() {
        return {&conv1_.w, &conv1_.b, &conv2_.w, &conv2_.b, &fc_.w, &fc_.b};
    }
    std::vector<const ParamTensor*> params() const {
        return {&conv1_.w, &conv1_.b, &conv2_.w, &conv2_.b, &fc_.w, &fc_.b};
    }

    void init(uint64_t seed) {
        SplitMix64 rng(derive_seed(seed, 0x63776e6eull));
        conv1_.w.init_normal(rng, std::sqrt(2.0 / (1 * 5 * 5)));
        conv2_.w.init_normal(rng, std::sqrt(2.0 / (16 * 5 * 5)));
        fc_.w.init_normal(rng, std::sqrt(1.0 / fc_.in_features));
    }

    struct Cache {
        Tensor4 x, c1, r1, p1, c2, r2, p2, flat, logits;
    };

    Tensor4 forward_logits(const Tensor4& x, Cache* cache = nullptr) const {
        if (x.c != 1 || x.h != patch_side_ || x.w != patch_side_)
            throw std::invalid_argument("CwnnModel: bad input shape");
        Tensor4 c1 = conv1_.forward(x);
        Tensor4 r1 = relu_forward(c1);
        Tensor4 p1 = haar_pool_forward(r1);
        Tensor4 c2 = conv2_.forward(p1);
        Tensor4 r2 = relu_forward(c2);
        Tensor4 p2 = haar_pool_forward(r2);
        Tensor4 flat = detail::flatten(p2);
        Tensor4 logits = fc_.forward(flat);
        if (cache) *cache = Cache{x, std::move(c1), std::move(r1), std::move(p1),
                                  std::move(c2), std::move(r2), std::move(p2),
                                  std::move(flat), logits};
        return logits;
    }

    /// Softmax class probabilities, shape (n, 2, 1, 1).
    Tensor4 forward(const Tensor4& x) const { return softmax(forward_logits(x)); }

    void backward(const Cache& cache, const Tensor4& dlogits) {
        Tensor4 dflat = fc_.backward(cache.flat, dlogits);
        Tensor4 dp2 = detail::reshape(dflat, cache.p2.c, cache.p2.h, cache.p2.w);
        Tensor4 dr2 = haar_pool_backward(dp2);
        Tensor4 dc2 = relu_backward(cache.c2, dr2);
        Tensor4 dp1 = conv2_.backward(cache.p1, dc2);
        Tensor4 dr1 = haar_pool_backward(dp1);
        Tensor4 dc1 = relu_backward(cache.c1, dr1);
        conv1_.backward(cache.x, dc1);
    }

    std::vector<double> loss_trace; // per-epoch mean training loss

private:
    int patch_side_;
    Conv2d conv1_, conv2_;
    Dense fc_;
};

struct CwnnConfig {
    double lr = 1e-4;
    int epochs = 12;
    int batch = 64;
    uint64_t seed = 1;
};

/// Trains the classifier on a balanced patch set. `labels` align with
/// `patches` (1 = changed, 0 = unchanged); both classes must be present.
inline CwnnModel cwnn_train(const PatchSet& patches, const std::vector<int>& labels,
                            const CwnnConfig& cfg) {
    if (patches.size() == 0 || patches.size() != labels.size())
        throw std::invalid_argument("cwnn_train: patch/label count mismatch");
    const long pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<long>(labels.size()))
        throw std::invalid_argument("cwnn_train: both classes must be present");
    if (cfg.epochs < 1 || cfg.batch < 1) throw std::invalid_argument("cwnn_train: bad config");

    CwnnModel model(patches.patch_size);
    model.init(cfg.seed);
    auto params = model.params();
    Adam opt(cfg.lr);

    const size_t n = patches.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 shuffle_rng(derive_seed(cfg.seed, 0x73687566ull));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(order, shuffle_rng);
        double epoch_loss = 0.0;
        long batches = 0;
        for (size_t start = 0; start < n; start += cfg.batch) {
            const size_t end = std::min(n, start + cfg.batch);
            std::vector<size_t> idx(order.begin() + start, order.begin() + end);
            Tensor4 x = detail::patches_to_tensor(patches, idx);
            std::vector<int> y(idx.size());
            for (size_t i = 0; i < idx.size(); ++i) y[i] = labels[idx[i]];

            for (ParamTensor* p : params) p->zero_grad();
            CwnnModel::Cache cache;
            Tensor4 logits = model.forward_logits(x, &cache);
            Tensor4 dlogits;
            epoch_loss += softmax_cross_entropy(logits, y, dlogits);
            model.backward(cache, dlogits);
            opt.step(params);
            ++batches;
        }
        model.loss_trace.push_back(epoch_loss / std::max(1L, batches));
    }
    return model;
}

/// Argmax labels for a patch set; exact probability ties resolve to
/// unchanged.
inline std::vector<int> cwnn_classify(const CwnnModel& model, const PatchSet& patches) {
    std::vector<int> out(patches.size());
    if (patches.size() == 0) return out;
    constexpr size_t kBatch = 256;
    for (size_t start = 0; start < patches.size(); start += kBatch) {
        const size_t end = std::min(patches.size(), start + kBatch);
        std::vector<size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Tensor4 probs = model.forward(detail::patches_to_tensor(patches, idx));
        for (size_t i = 0; i < idx.size(); ++i)
            out[idx[i]] = probs.at(static_cast<int>(i), 1, 0, 0) >
                                  probs.at(static_cast<int>(i), 0, 0, 0)
                              ? 1
                              : 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// DCGAN: 28x28 patch generator and discriminator.
// ---------------------------------------------------------------------------

class DcganGenerator {
public:
    static constexpr int kNoiseDim = 100;

    DcganGenerator()
        : fc_("g.fc", kNoiseDim, 128 * 4 * 4),
          d1_("g.deconv1", 128, 64, 4, 1, 0),
          d2_("g.deconv2", 64, 32, 4, 2, 1),
          d3_("g.deconv3", 32, 1, 4, 2, 1) {}

    std::vector<ParamTensor*> params() {
        return {&fc_.w, &fc_.b, &d1_.w, &d1_.b, &d2_.w, &d2_.b, &d3_.w, &d3_.b};
    }
    std::vector<const ParamTensor*> params() const {
        return {&fc_.w, &fc_.b, &d1_.w, &d1_.b, &d2_.w, &d2_.b, &d3_.w, &d3_.b};
    }

    void init(uint64_t seed) {
        SplitMix64 rng(derive_seed(seed, 0x67656eull));
        for (ParamTensor* p : {&fc_.w, &d1_.w, &d2_.w, &d3_.w}) p->init_normal(rng, 0.02);
    }

    struct Cache {
        Tensor4 z, seed_map, r0, x1, r1, x2, r2, x3, y;
    };

    /// noise (n, 100, 1, 1) -> patches (n, 1, 28, 28) in (-1, 1).
    Tensor4 forward(const Tensor4& noise, Cache* cache = nullptr) const {
        if (noise.sample_size() != kNoiseDim)
            throw std::invalid_argument("DcganGenerator: noise must have 100 elements per sample");
        Tensor4 seed_map = detail::reshape(fc_.forward(noise), 128, 4, 4);
        Tensor4 r0 = relu_forward(seed_map);
        Tensor4 x1 = d1_.forward(r0);
        Tensor4 r1 = relu_forward(x1);
        Tensor4 x2 = d2_.forward(r1);
        Tensor4 r2 = relu_forward(x2);
        Tensor4 x3 = d3_.forward(r2);
        Tensor4 y = tanh_forward(x3);
        if (cache) *cache = Cache{noise, std::move(seed_map), std::move(r0), std::move(x1),
                                  std::move(r1), std::move(x2), std::move(r2), std::move(x3), y};
        return y;
    }

    void backward(const Cache& cache, const Tensor4& dy) {
        Tensor4 dx3 = tanh_backward(cache.y, dy);
        Tensor4 dr2 = d3_.backward(cache.r2, dx3);
        Tensor4 dx2 = relu_backward(cache.x2, dr2);
        Tensor4 dr1 = d2_.backward(cache.r1, dx2);
        Tensor4 dx1 = relu_backward(cache.x1, dr1);
        Tensor4 dr0 = d1_.backward(cache.r0, dx1);
        Tensor4 dseed = relu_backward(cache.seed_map, dr0);
        fc_.backward(cache.z, detail::flatten(dseed));
    }

private:
    Dense fc_;
    ConvTranspose2d d1_, d2_, d3_;
};

class DcganDiscriminator {
public:
    explicit DcganDiscriminator(int patch_side = 28)
        : patch_side_(patch_side),
          c1_("d.conv1", 1, 32, 4, 2, 1),
          c2_("d.conv2", 32, 64, 4, 2, 1),
          fc_("d.fc", 64 * (patch_side / 4) * (patch_side / 4), 1) {
        if (patch_side < 4 || patch_side % 4 != 0)
            throw std::invalid_argument("DcganDiscriminator: patch side must be a multiple of 4");
    }

    std::vector<ParamTensor*> params() { return {&c1_.w, &c1_.b, &c2_.w, &c2_.b, &fc_.w, &fc_.b}; }
    std::vector<const ParamTensor*> params() const {
        return {&c1_.w, &c1_.b, &c2_.w, &c2_.b, &fc_.w, &fc_.b};
    }

    void init(uint64_t seed) {
        SplitMix64 rng(derive_seed(seed, 0x64697363ull));
        for (ParamTensor* p : {&c1_.w, &c2_.w, &fc_.w}) p->init_normal(rng, 0.02);
    }

    struct Cache {
        Tensor4 x, l1, a1, l2, a2, flat, logits;
    };

    /// Raw scores (n, 1, 1, 1); apply sigmoid for probabilities.
    Tensor4 forward_logits(const Tensor4& x, Cache* cache = nullptr) const {
        Tensor4 l1 = c1_.forward(x);
        Tensor4 a1 = leaky_relu_forward(l1);
        Tensor4 l2 = c2_.forward(a1);
        Tensor4 a2 = leaky_relu_forward(l2);
        Tensor4 flat = detail::flatten(a2);
        Tensor4 logits = fc_.forward(flat);
        if (cache) *cache = Cache{x, std::move(l1), std::move(a1), std::move(l2),
                                  std::move(a2), std::move(flat), logits};
        return logits;
    }

    /// Accumulates parameter gradients and returns the input gradient (used
    /// to drive the generator update).
    Tensor4 backward(const Cache& cache, const Tensor4& dlogits) {
        Tensor4 dflat = fc_.backward(cache.flat, dlogits);
        Tensor4 da2 = detail::reshape(dflat, cache.a2.c, cache.a2.h, cache.a2.w);
        Tensor4 dl2 = leaky_relu_backward(cache.l2, da2);
        Tensor4 da1 = c2_.backward(cache.a1, dl2);
        Tensor4 dl1 = leaky_relu_backward(cache.l1, da1);
        return c1_.backward(cache.x, dl1);
    }

private:
    int patch_side_;
    Conv2d c1_, c2_;
    Dense fc_;
};

struct GanTraceRow {
    int epoch = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double objective = 0.0; // E[log D(real)] + E[log(1 - D(fake))]
};

struct DcganModel {
    DcganGenerator g;
    DcganDiscriminator d;
    std::vector<GanTraceRow> trace;

    std::vector<ParamTensor*> params() {
        auto p = g.params();
        const auto dp = d.params();
        p.insert(p.end(), dp.begin(), dp.end());
        return p;
    }
};

struct DcganConfig {
    double lr_g = 3e-4;
    double lr_d = 6e-4;
    int epochs = 50;
    int batches_per_epoch = 4;
    int batch = 32;
    uint64_t seed = 1;
    double real_lo = 0.8, real_hi = 1.0; // smoothed real targets
    double fake_lo = 0.0, fake_hi = 0.2; // smoothed fake targets
};

inline Tensor4 dcgan_noise(int n, SplitMix64& rng) {
    Tensor4 z(n, DcganGenerator::kNoiseDim, 1, 1);
    for (double& v : z.v) v = normal_draw(rng);
    return z;
}

/// One discriminator update on a real and a fake batch; returns the summed
/// mean BCE of the two halves.
inline double dcgan_d_step(DcganModel& model, Adam& opt, const Tensor4& real, const Tensor4& fake,
                           const std::vector<double>& real_targets,
                           const std::vector<double>& fake_targets,
                           double* objective_out = nullptr) {
    auto dparams = model.d.params();
    for (ParamTensor* p : dparams) p->zero_grad();

    DcganDiscriminator::Cache cr, cf;
    Tensor4 logits_r = model.d.forward_logits(real, &cr);
    Tensor4 logits_f = model.d.forward_logits(fake, &cf);
    Tensor4 dlr, dlf;
    const double loss_r = bce_with_logits(logits_r, real_targets, dlr);
    const double loss_f = bce_with_logits(logits_f, fake_targets, dlf);
    model.d.backward(cr, dlr);
    model.d.backward(cf, dlf);
    opt.step(dparams);

    if (objective_out) {
        double v = 0.0;
        for (int i = 0; i < logits_r.n; ++i) {
            const double s = 1.0 / (1.0 + std::exp(-logits_r.v[i]));
            v += std::log(std::clamp(s, 1e-12, 1.0));
        }
        for (int i = 0; i < logits_f.n; ++i) {
            const double s = 1.0 / (1.0 + std::exp(-logits_f.v[i]));
            v += std::log(std::clamp(1.0 - s, 1e-12, 1.0));
        }
        *objective_out = v / logits_r.n;
    }
    return loss_r + loss_f;
}

/// One generator update in the non-saturating form (drive D(G(z)) towards 1).
inline double dcgan_g_step(DcganModel& model, Adam& opt, const Tensor4& noise) {
    auto gparams = model.g.params();
    for (ParamTensor* p : gparams) p->zero_grad();
    auto dparams = model.d.params();
    for (ParamTensor* p : dparams) p->zero_grad(); // scratch; D is not stepped here

    DcganGenerator::Cache gc;
    Tensor4 fake = model.g.forward(noise, &gc);
    DcganDiscriminator::Cache dc;
    Tensor4 logits = model.d.forward_logits(fake, &dc);
    Tensor4 dlogits;
    const std::vector<double> ones(static_cast<size_t>(logits.n), 1.0);
    const double loss = bce_with_logits(logits, ones, dlogits);
    Tensor4 dfake = model.d.backward(dc, dlogits);
    model.g.backward(gc, dfake);
    opt.step(gparams);
    return loss;
}

/// Adversarial training on real changed-class patches (28x28, values in
/// [-1, 1]). Alternates one smoothed-target discriminator step and one
/// non-saturating generator step per batch.
inline DcganModel dcgan_train(const PatchSet& real, const DcganConfig& cfg) {
    if (real.size() < 16) throw std::invalid_argument("dcgan_train: need at least 16 real patches");
    if (real.patch_size != 28)
        throw std::invalid_argument("dcgan_train: generator emits 28x28 patches only");
    if (cfg.epochs < 1 || cfg.batches_per_epoch < 1 || cfg.batch < 1)
        throw std::invalid_argument("dcgan_train: bad config");

    DcganModel model;
    model.g.init(derive_seed(cfg.seed, 1));
    model.d.init(derive_seed(cfg.seed, 2));
    Adam opt_g(cfg.lr_g), opt_d(cfg.lr_d);

    SplitMix64 noise_rng(derive_seed(cfg.seed, 3));
    SplitMix64 target_rng(derive_seed(cfg.seed, 4));
    SplitMix64 shuffle_rng(derive_seed(cfg.seed, 5));

    const int n = static_cast<int>(real.size());
    const int batch = std::min(cfg.batch, n);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size(); // force a shuffle on first use

    auto next_real_batch = [&]() {
        std::vector<size_t> idx(batch);
        for (int i = 0; i < batch; ++i) {
            if (cursor == order.size()) {
                shuffle_indices(order, shuffle_rng);
                cursor = 0;
            }
            idx[i] = order[cursor++];
        }
        return detail::patches_to_tensor(real, idx);
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        GanTraceRow row;
        row.epoch = epoch;
        for (int b = 0; b < cfg.batches_per_epoch; ++b) {
            Tensor4 real_batch = next_real_batch();
            Tensor4 fake_batch = model.g.forward(dcgan_noise(batch, noise_rng));
            std::vector<double> tr(batch), tf(batch);
            for (int i = 0; i < batch; ++i) {
                tr[i] = target_rng.uniform(cfg.real_lo, cfg.real_hi);
                tf[i] = target_rng.uniform(cfg.fake_lo, cfg.fake_hi);
            }
            double objective = 0.0;
            row.d_loss += dcgan_d_step(model, opt_d, real_batch, fake_batch, tr, tf, &objective);
            row.objective += objective;
            row.g_loss += dcgan_g_step(model, opt_g, dcgan_noise(batch, noise_rng));
        }
        row.d_loss /= cfg.batches_per_epoch;
        row.g_loss /= cfg.batches_per_epoch;
        row.objective /= cfg.batches_per_epoch;
        model.trace.push_back(row);
    }
    return model;
}

/// Draws n generated patches; deterministic in (model, n, seed).
inline PatchSet dcgan_sample(const DcganModel& model, int n, uint64_t seed) {
    PatchSet out;
    out.patch_size = 28;
    out.cls = TernaryLabel::Changed;
    if (n == 0) return out;
    if (n < 0) throw std::invalid_argument("dcgan_sample: n must be >= 0");
    SplitMix64 rng(derive_seed(seed, 0x73616d70ull));
    constexpr int kBatch = 64;
    for (int start = 0; start < n; start += kBatch) {
        const int count = std::min(kBatch, n - start);
        const Tensor4 y = model.g.forward(dcgan_noise(count, rng));
        for (int i = 0; i < count; ++i) {
            std::vector<double> patch(y.sample(i), y.sample(i) + y.sample_size());
            out.push(std::move(patch), {-1, -1}, Provenance::Generated);
        }
    }
    return out;
}

/// Convenience overload matching the pipeline wiring: the balance step's
/// generator is the trained DCGAN.
inline BalancedSets balance_sets(const PatchSet& changed, const PatchSet& unchanged,
                                 const DcganModel& model, int n_t, uint64_t seed) {
    return balance_sets(changed, unchanged,
                        [&](int count, uint64_t s) { return dcgan_sample(model, count, s); }, n_t,
                        seed);
}

} // namespace sarcd
