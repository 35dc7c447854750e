// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "sarcd/raster.hpp"

namespace sarcd {

struct SuperpixelStats {
    int size = 0;
    double mean = 0.0;
    double median = 0.0;
};

/// Per-pixel superpixel label map plus per-superpixel statistics.
/// Labels are contiguous in [0, count) and each label's pixel set is
/// 4-connected after slic() returns.
struct Segmentation {
    int width = 0;
    int height = 0;
    int count = 0;
    std::vector<int> labels;               // row-major, same dims as source raster
    std::vector<SuperpixelStats> stats;    // filled by superpixel_stats()
    std::vector<double> objective_trace;   // sum of squared SLIC distances per iteration

    int label_at(int row, int col) const { return labels[static_cast<size_t>(row) * width + col]; }
};

namespace detail {

struct SlicCentre {
    double intensity = 0.0;
    double x = 0.0;
    double y = 0.0;
};

/// Gradient magnitude squared by central differences (mirror borders).
inline double gradient_sq(const Raster& r, int row, int col) {
    const double gx = r.at_reflect(row, col + 1) - r.at_reflect(row, col - 1);
    const double gy = r.at_reflect(row + 1, col) - r.at_reflect(row - 1, col);
    return gx * gx + gy * gy;
}

/// Grid dimensions (nx, ny) whose product best approximates k.
inline std::pair<int, int> seed_grid_dims(int width, int height, int k) {
    const double step = std::sqrt(static_cast<double>(width) * height / k);
    auto candidates = [&](int extent) {
        const double raw = extent / step;
        std::vector<int> c{1, static_cast<int>(std::floor(raw)), static_cast<int>(std::lround(raw)),
                           static_cast<int>(std::ceil(raw)), static_cast<int>(std::ceil(raw)) + 1};
        for (int& v : c) v = std::clamp(v, 1, extent);
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
        return c;
    };
    int best_nx = 1, best_ny = 1;
    long best_err = std::numeric_limits<long>::max();
    for (int nx : candidates(width))
        for (int ny : candidates(height)) {
            const long err = std::labs(static_cast<long>(nx) * ny - k);
            if (err < best_err) {
                best_err = err;
                best_nx = nx;
                best_ny = ny;
            }
        }
    return {best_nx, best_ny};
}

/// Splits the labelling of one label value into 4-connected components.
/// Returns pixel lists, ordered by each component's first pixel index.
inline std::vector<std::vector<int>> connected_components(const std::vector<int>& labels, int width,
                                                          int height, int label,
                                                          std::vector<int>& scratch_mark,
                                                          int mark_value) {
    std::vector<std::vector<int>> comps;
    const int n = width * height;
    for (int start = 0; start < n; ++start) {
        if (labels[start] != label || scratch_mark[start] == mark_value) continue;
        comps.emplace_back();
        std::vector<int>& comp = comps.back();
        std::queue<int> q;
        q.push(start);
        scratch_mark[start] = mark_value;
        while (!q.empty()) {
            const int p = q.front();
            q.pop();
            comp.push_back(p);
            const int y = p / width, x = p % width;
            const int nbs[4] = {p - width, p + width, p - 1, p + 1};
            const bool ok[4] = {y > 0, y + 1 < height, x > 0, x + 1 < width};
            for (int i = 0; i < 4; ++i) {
                if (!ok[i]) continue;
                const int np = nbs[i];
                if (labels[np] == label && scratch_mark[np] != mark_value) {
                    scratch_mark[np] = mark_value;
                    q.push(np);
                }
            }
        }
    }
    return comps;
}

/// Relabels every fragment (non-largest component of its label) to the
/// adjacent label sharing the longest boundary. Repeats until all labels
/// are 4-connected.
inline void enforce_connectivity(std::vector<int>& labels, int width, int height, int label_count) {
    const int n = width * height;
    std::vector<int> mark(n, -1);
    for (int pass = 0; pass < 64; ++pass) {
        bool changed = false;
        const int mark_value = pass;
        for (int lab = 0; lab < label_count; ++lab) {
            auto comps = connected_components(labels, width, height, lab, mark, mark_value);
            if (comps.size() <= 1) continue;
            // Keep the largest component (ties: first in scan order).
            size_t keep = 0;
            for (size_t i = 1; i < comps.size(); ++i)
                if (comps[i].size() > comps[keep].size()) keep = i;
            for (size_t i = 0; i < comps.size(); ++i) {
                if (i == keep) continue;
                // Boundary histogram over neighbouring labels.
                std::vector<int> border_count(label_count, 0);
                for (int p : comps[i]) {
                    const int y = p / width, x = p % width;
                    const int nbs[4] = {p - width, p + width, p - 1, p + 1};
                    const bool ok[4] = {y > 0, y + 1 < height, x > 0, x + 1 < width};
                    for (int d = 0; d < 4; ++d)
                        if (ok[d] && labels[nbs[d]] != lab) ++border_count[labels[nbs[d]]];
                }
                int target = -1, best = 0;
                for (int cand = 0; cand < label_count; ++cand)
                    if (border_count[cand] > best) {
                        best = border_count[cand];
                        target = cand;
                    }
                if (target < 0) continue; // isolated fragment of a full-image label
                for (int p : comps[i]) labels[p] = target;
                changed = true;
            }
        }
        if (!changed) return;
    }
}

} // namespace detail

/// Fills per-label size/mean/median statistics. The median of an even-sized
/// set is the lower-middle element.
inline void superpixel_stats(const Raster& r, Segmentation& seg) {
    if (r.width() != seg.width || r.height() != seg.height)
        throw std::invalid_argument("superpixel_stats: raster/segmentation size mismatch");
    seg.stats.assign(seg.count, SuperpixelStats{});
    std::vector<std::vector<double>> values(seg.count);
    for (size_t p = 0; p < r.size(); ++p) values[seg.labels[p]].push_back(r[p]);
    for (int lab = 0; lab < seg.count; ++lab) {
        auto& v = values[lab];
        SuperpixelStats& s = seg.stats[lab];
        s.size = static_cast<int>(v.size());
        double sum = 0.0;
        for (double x : v) sum += x;
        s.mean = sum / static_cast<double>(v.size());
        const size_t mid = (v.size() - 1) / 2; // lower-middle for even sizes
        std::nth_element(v.begin(), v.begin() + mid, v.end());
        s.median = v[mid];
    }
}

/// SLIC superpixels on a single-channel raster.
///
/// Distance: D^2 = (dI)^2 + (compactness * d_xy / S)^2 with S = sqrt(area/k).
/// Seeds sit on a hexagonally offset grid, perturbed to the lowest-gradient
/// pixel in a 3x3 neighbourhood; assignment searches a 2S x 2S window around
/// each centre. Orphan fragments are merged into the neighbour sharing the
/// longest boundary. Fully deterministic; the seed parameter is reserved.
inline Segmentation slic(const Raster& r, int k, double compactness = 0.1, int iters = 10,
                         uint64_t /*seed*/ = 0) {
    const int w = r.width(), h = r.height();
    const int n = w * h;
    if (k < 1 || k > n) throw std::invalid_argument("slic: k must be in [1, pixel count]");
    if (compactness <= 0.0) throw std::invalid_argument("slic: compactness must be positive");
    if (iters < 1) throw std::invalid_argument("slic: iters must be >= 1");

    const double S = std::sqrt(static_cast<double>(n) / k);
    const double spatial_scale = compactness / S;

    // Seed placement.
    auto [nx, ny] = detail::seed_grid_dims(w, h, k);
    std::vector<detail::SlicCentre> centres;
    centres.reserve(static_cast<size_t>(nx) * ny);
    const double cell_w = static_cast<double>(w) / nx;
    const double cell_h = static_cast<double>(h) / ny;
    for (int j = 0; j < ny; ++j) {
        const double offset = (j % 2 == 1) ? 0.5 : 0.0;
        for (int i = 0; i < nx; ++i) {
            int sx = std::clamp(static_cast<int>((i + 0.5 + offset) * cell_w), 0, w - 1);
            int sy = std::clamp(static_cast<int>((j + 0.5) * cell_h), 0, h - 1);
            // Perturb to the lowest-gradient pixel in the 3x3 neighbourhood.
            double best_grad = std::numeric_limits<double>::infinity();
            int bx = sx, by = sy;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int py = std::clamp(sy + dy, 0, h - 1);
                    const int px = std::clamp(sx + dx, 0, w - 1);
                    const double g = detail::gradient_sq(r, py, px);
                    if (g < best_grad) {
                        best_grad = g;
                        by = py;
                        bx = px;
                    }
                }
            centres.push_back({r.at(by, bx), static_cast<double>(bx), static_cast<double>(by)});
        }
    }
    const int kk = static_cast<int>(centres.size());

    std::vector<int> labels(n, -1);
    std::vector<double> best(n);
    Segmentation seg;
    seg.width = w;
    seg.height = h;

    auto distance_sq = [&](int p, const detail::SlicCentre& c) {
        const double di = r[p] - c.intensity;
        const double dx = (p % w) - c.x;
        const double dy = (p / w) - c.y;
        const double ds = spatial_scale * std::sqrt(dx * dx + dy * dy);
        return di * di + ds * ds;
    };

    for (int it = 0; it < iters; ++it) {
        // Current assignment is the baseline candidate so pixels outside all
        // search windows keep a valid label and the assignment step can only
        // lower the objective.
        for (int p = 0; p < n; ++p)
            best[p] = labels[p] >= 0 ? distance_sq(p, centres[labels[p]])
                                     : std::numeric_limits<double>::infinity();

        for (int c = 0; c < kk; ++c) {
            const int x0 = std::max(0, static_cast<int>(std::floor(centres[c].x - S)));
            const int x1 = std::min(w - 1, static_cast<int>(std::ceil(centres[c].x + S)));
            const int y0 = std::max(0, static_cast<int>(std::floor(centres[c].y - S)));
            const int y1 = std::min(h - 1, static_cast<int>(std::ceil(centres[c].y + S)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const int p = y * w + x;
                    const double d = distance_sq(p, centres[c]);
                    if (d < best[p]) {
                        best[p] = d;
                        labels[p] = c;
                    }
                }
        }
        // First iteration can leave distant pixels uncovered; assign them by
        // full search.
        if (it == 0) {
            for (int p = 0; p < n; ++p) {
                if (labels[p] >= 0) continue;
                for (int c = 0; c < kk; ++c) {
                    const double d = distance_sq(p, centres[c]);
                    if (d < best[p]) {
                        best[p] = d;
                        labels[p] = c;
                    }
                }
            }
        }

        double objective = 0.0;
        for (int p = 0; p < n; ++p) objective += best[p];
        seg.objective_trace.push_back(objective);

        // Centre update: means over members (empty clusters keep position).
        std::vector<double> acc_i(kk, 0.0), acc_x(kk, 0.0), acc_y(kk, 0.0);
        std::vector<int> cnt(kk, 0);
        for (int p = 0; p < n; ++p) {
            const int c = labels[p];
            acc_i[c] += r[p];
            acc_x[c] += p % w;
            acc_y[c] += p / w;
            ++cnt[c];
        }
        for (int c = 0; c < kk; ++c) {
            if (cnt[c] == 0) continue;
            centres[c].intensity = acc_i[c] / cnt[c];
            centres[c].x = acc_x[c] / cnt[c];
            centres[c].y = acc_y[c] / cnt[c];
        }
    }

    detail::enforce_connectivity(labels, w, h, kk);

    // Compact labels to [0, count) in scan order of first occurrence.
    std::vector<int> remap(kk, -1);
    int next = 0;
    for (int p = 0; p < n; ++p) {
        if (remap[labels[p]] < 0) remap[labels[p]] = next++;
        labels[p] = remap[labels[p]];
    }
    seg.count = next;
    seg.labels = std::move(labels);
    return seg;
}

} // namespace sarcd
