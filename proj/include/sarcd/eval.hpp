// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "sarcd/clustering.hpp"
#include "sarcd/raster.hpp"

namespace sarcd {

struct ConfusionCounts {
    long long tp = 0, fp = 0, fn = 0, tn = 0;

    long long total() const { return tp + fp + fn + tn; }
    long long n_changed() const { return tp + fn; }    // reference positives
    long long n_unchanged() const { return tn + fp; }  // reference negatives
};

/// Confusion counts and the derived accuracy indicators. The false-alarm
/// rate divides by the predicted-positive count (1 - precision), not by the
/// reference-negative count.
struct Metrics {
    ConfusionCounts counts;
    long long fa = 0; // false alarms = FP
    long long md = 0; // missed detections = FN
    double p_fa = 0.0;
    double p_md = 0.0;
    double pcc = 0.0;
    double pre = 0.0;
    double kc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Merges the clustering's simple-pixel decisions with the classifier's hard
/// pixel labels (given in raster scan order of the hard pixels) into a {0,1}
/// change map.
inline Raster compose_change_map(const TernaryMap& ternary, const std::vector<int>& hard_labels) {
    if (static_cast<long>(hard_labels.size()) != ternary.hard)
        throw std::invalid_argument("compose_change_map: hard label count mismatch");
    Raster out(ternary.width, ternary.height);
    size_t next_hard = 0;
    for (size_t p = 0; p < out.size(); ++p) {
        switch (ternary.labels[p]) {
            case TernaryLabel::Changed: out[p] = 1.0; break;
            case TernaryLabel::Unchanged: out[p] = 0.0; break;
            case TernaryLabel::Hard: out[p] = hard_labels[next_hard++] ? 1.0 : 0.0; break;
        }
    }
    return out;
}

/// Pixel-wise confusion of two binary rasters (values > 0.5 count as
/// changed).
inline ConfusionCounts confusion(const Raster& pred, const Raster& ref) {
    if (!pred.same_dims(ref)) throw std::invalid_argument("confusion: dimension mismatch");
    ConfusionCounts c;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] > 0.5;
        const bool r = ref[i] > 0.5;
        if (p && r) ++c.tp;
        else if (p && !r) ++c.fp;
        else if (!p && r) ++c.fn;
        else ++c.tn;
    }
    return c;
}

/// Accuracy indicators from confusion counts. Zero-denominator rates are
/// defined as 0 (worst-case scoring for degenerate predictors).
inline Metrics metrics(const ConfusionCounts& c) {
    if (c.total() <= 0) throw std::invalid_argument("metrics: empty confusion counts");
    Metrics m;
    m.counts = c;
    m.fa = c.fp;
    m.md = c.fn;

    const double n_c = static_cast<double>(c.n_changed());
    const double n_uc = static_cast<double>(c.n_unchanged());
    const double total = static_cast<double>(c.total());
    const double pred_pos = static_cast<double>(c.tp + c.fp);

    m.p_fa = pred_pos > 0 ? static_cast<double>(m.fa) / pred_pos : 0.0;
    m.p_md = n_c > 0 ? static_cast<double>(m.md) / n_c : 0.0;
    m.pcc = 1.0 - static_cast<double>(m.fa + m.md) / total;
    m.pre = (n_c * static_cast<double>(c.tp + c.fn) + n_uc * static_cast<double>(c.tn + c.fp)) /
            (total * total);
    m.kc = m.pre < 1.0 ? (m.pcc - m.pre) / (1.0 - m.pre) : 1.0;
    m.precision = pred_pos > 0 ? static_cast<double>(c.tp) / pred_pos : 0.0;
    m.recall = n_c > 0 ? static_cast<double>(c.tp) / n_c : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
    return nlohmann::json{
        {"tp", m.counts.tp},       {"fp", m.counts.fp}, {"fn", m.counts.fn},
        {"tn", m.counts.tn},       {"fa", m.fa},        {"md", m.md},
        {"p_fa", m.p_fa},          {"p_md", m.p_md},    {"pcc", m.pcc},
        {"pre", m.pre},            {"kc", m.kc},        {"f1", m.f1},
        {"precision", m.precision},{"recall", m.recall}};
}

} // namespace sarcd
