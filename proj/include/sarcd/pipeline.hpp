// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sarcd/config.hpp"
#include "sarcd/di.hpp"
#include "sarcd/eval.hpp"
#include "sarcd/nets.hpp"
#include "sarcd/sampling.hpp"

namespace sarcd {

enum class DiMethod { LogRatio, SmoothedLogRatio, MultiScale };

inline DiMethod di_method_from_string(const std::string& s) {
    if (s == "lr") return DiMethod::LogRatio;
    if (s == "slr") return DiMethod::SmoothedLogRatio;
    if (s == "msrdi") return DiMethod::MultiScale;
    throw std::invalid_argument("unknown DI method '" + s + "' (expected lr, slr or msrdi)");
}

struct DiArtifacts {
    Raster di;
    double threshold = 0.0;
    Raster binary; // {0, 1}
};

/// The DI evaluation harness: one difference operator followed by Otsu
/// binarization.
inline DiArtifacts run_di(const Raster& i1, const Raster& i2, const PipelineConfig& cfg,
                          DiMethod method) {
    const DiConfig dc = cfg.di();
    Raster di(1, 1);
    switch (method) {
        case DiMethod::LogRatio: {
            const Raster a = smooth(i1, dc.eta);
            const Raster b = smooth(i2, dc.eta);
            di = log_ratio(a, b, detail::ratio_floor(dc, a, b));
            break;
        }
        case DiMethod::SmoothedLogRatio:
            di = compute_slr(i1, i2, dc);
            break;
        case DiMethod::MultiScale:
            di = msrdi(i1, i2, dc);
            break;
    }
    DiArtifacts out{di, 0.0, Raster(di.width(), di.height(), 0.0)};
    if (di.is_constant()) {
        // No contrast to threshold: an empty change map with the constant as
        // the nominal threshold.
        out.threshold = di[0];
        return out;
    }
    out.threshold = otsu_threshold(di, dc.otsu_bins);
    for (size_t p = 0; p < di.size(); ++p) out.binary[p] = di[p] > out.threshold ? 1.0 : 0.0;
    return out;
}

struct DetectArtifacts {
    Raster msrdi_image;
    TernaryMap ternary;
    Raster change_map; // {0, 1}
    long n1 = 0, n2 = 0, nh = 0;
    int n_t = 0;
    bool gan_used = false;
    std::string gan_skip_reason;
    std::vector<GanTraceRow> gan_trace;
    std::vector<double> cwnn_loss_trace;
    double patch_scale_min = 0.0, patch_scale_max = 0.0;
    nlohmann::json report;
};

/// Full change-detection pipeline on a co-registered intensity pair:
/// multi-scale DI, parallel constrained clustering, pseudo-label patch sets,
/// GAN-balanced classifier training, hard-pixel classification and final map
/// composition.
inline DetectArtifacts run_detect(const Raster& i1, const Raster& i2, const PipelineConfig& cfg) {
    if (!i1.same_dims(i2)) throw std::invalid_argument("detect: input dimension mismatch");
    if (cfg.lambda < 2 || cfg.lambda % 2 != 0)
        throw std::invalid_argument("detect: lambda must be a positive even integer");

    DetectArtifacts out;
    out.msrdi_image = msrdi(i1, i2, cfg.di());

    try {
        out.ternary = parallel_cluster(out.msrdi_image, cfg.cluster());
    } catch (const DegenerateInputError&) {
        throw EmptyMinorityError("detect: difference image is constant; no changed pixels");
    }

    // Patch intensities on a common [-1, 1] scale across both dates.
    out.patch_scale_min = std::min(i1.min(), i2.min());
    out.patch_scale_max = std::max(i1.max(), i2.max());
    if (out.patch_scale_max <= out.patch_scale_min)
        throw EmptyMinorityError("detect: constant input pair; no changed pixels");
    const double inv_range = 2.0 / (out.patch_scale_max - out.patch_scale_min);
    auto to_unit = [&](const Raster& r) {
        Raster s(r.width(), r.height());
        for (size_t p = 0; p < r.size(); ++p)
            s[p] = (r[p] - out.patch_scale_min) * inv_range - 1.0;
        return s;
    };
    const Raster u1 = to_unit(i1), u2 = to_unit(i2);

    PseudoSets sets = build_pseudo_sets(out.ternary, u1, u2, cfg.lambda);
    out.n1 = sets.n1();
    out.n2 = sets.n2();
    out.nh = sets.nh();
    if (out.n2 == 0)
        throw EmptyMinorityError("detect: clustering produced no unchanged pixels");

    long n_t = cfg.n_t > 0 ? cfg.n_t : std::min(out.n2, std::max(4 * out.n1, 512L));
    n_t = std::max(n_t, out.n1);
    if (n_t > out.n2)
        throw EmptyMinorityError("detect: unchanged class too small to balance against (" +
                                 std::to_string(out.n2) + " < " + std::to_string(n_t) + ")");

    bool want_gan = !cfg.skip_gan && n_t > out.n1;
    if (cfg.skip_gan) {
        out.gan_skip_reason = "disabled by configuration";
        n_t = out.n1;
    } else if (n_t == out.n1) {
        out.gan_skip_reason = "changed class already at target size";
    } else if (out.n1 < 16) {
        out.gan_skip_reason = "too few changed patches to train the generator";
        want_gan = false;
        n_t = out.n1;
    } else if (2 * cfg.lambda != 28) {
        out.gan_skip_reason = "generator supports 28x28 patches only";
        want_gan = false;
        n_t = out.n1;
    }
    out.n_t = static_cast<int>(n_t);

    BalancedSets balanced;
    if (want_gan) {
        const DcganModel gan = dcgan_train(sets.changed, cfg.dcgan());
        out.gan_trace = gan.trace;
        out.gan_used = true;
        balanced = balance_sets(sets.changed, sets.unchanged, gan, out.n_t,
                                derive_seed(cfg.seed, 0x62616cull));
    } else {
        balanced = balance_sets(
            sets.changed, sets.unchanged,
            [](int count, uint64_t) -> PatchSet {
                if (count != 0) throw std::logic_error("detect: unexpected generation request");
                return PatchSet{};
            },
            out.n_t, derive_seed(cfg.seed, 0x62616cull));
    }

    // Merge the balanced sets into one training set.
    PatchSet train;
    train.patch_size = balanced.changed.patch_size;
    train.patches = balanced.changed.patches;
    train.patches.insert(train.patches.end(), balanced.unchanged.patches.begin(),
                         balanced.unchanged.patches.end());
    const CwnnModel classifier = cwnn_train(train, balanced.labels, cfg.cwnn());
    out.cwnn_loss_trace = classifier.loss_trace;

    const std::vector<int> hard_labels = cwnn_classify(classifier, sets.hard);
    out.change_map = compose_change_map(out.ternary, hard_labels);

    out.report = nlohmann::json{
        {"config", cfg.to_json()},
        {"counts",
         {{"n1_changed", out.n1},
          {"n2_unchanged", out.n2},
          {"nh_hard", out.nh},
          {"n_t", out.n_t},
          {"generated", out.n_t - out.n1 > 0 && out.gan_used ? out.n_t - out.n1 : 0},
          {"hard_classified_changed",
           static_cast<long>(std::count(hard_labels.begin(), hard_labels.end(), 1))}}},
        {"gan",
         {{"used", out.gan_used},
          {"skip_reason", out.gan_skip_reason}}},
        {"patch_scaling", {{"min", out.patch_scale_min}, {"max", out.patch_scale_max}}}};

    nlohmann::json cwnn_trace_json = nlohmann::json::array();
    for (double v : out.cwnn_loss_trace) cwnn_trace_json.push_back(v);
    nlohmann::json gan_trace_json = nlohmann::json::array();
    for (const GanTraceRow& rowv : out.gan_trace)
        gan_trace_json.push_back({{"epoch", rowv.epoch},
                                  {"d_loss", rowv.d_loss},
                                  {"g_loss", rowv.g_loss},
                                  {"objective", rowv.objective}});
    out.report["traces"] = {{"cwnn_loss", cwnn_trace_json}, {"gan", gan_trace_json}};
    return out;
}

/// TernaryMap rendered as {0, 128, 255} = {unchanged, hard, changed}.
inline Raster ternary_to_raster(const TernaryMap& map) {
    Raster out(map.width, map.height);
    for (size_t p = 0; p < out.size(); ++p) {
        switch (map.labels[p]) {
            case TernaryLabel::Unchanged: out[p] = 0.0; break;
            case TernaryLabel::Hard: out[p] = 128.0; break;
            case TernaryLabel::Changed: out[p] = 255.0; break;
        }
    }
    return out;
}

} // namespace sarcd
