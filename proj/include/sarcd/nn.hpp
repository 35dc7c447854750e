// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarcd/errors.hpp"
#include "sarcd/rng.hpp"

namespace sarcd {

/// Dense NCHW tensor of doubles.
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {
        if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
            throw std::invalid_argument("Tensor4: dimensions must be positive");
    }

    size_t numel() const { return v.size(); }
    size_t sample_size() const { return static_cast<size_t>(c) * h * w; }

    double& at(int i, int j, int y, int x) {
        return v[((static_cast<size_t>(i) * c + j) * h + y) * w + x];
    }
    double at(int i, int j, int y, int x) const {
        return v[((static_cast<size_t>(i) * c + j) * h + y) * w + x];
    }

    double* sample(int i) { return v.data() + static_cast<size_t>(i) * sample_size(); }
    const double* sample(int i) const { return v.data() + static_cast<size_t>(i) * sample_size(); }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

namespace detail {

/// Row-major C(MxN) = A(MxK) * B(KxN) + C. Deterministic accumulation order;
/// parallel rows own disjoint output.
inline void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C) {
#pragma omp parallel for if (static_cast<long long>(M) * N * K > 65536)
    for (int i = 0; i < M; ++i) {
        double* ci = C + static_cast<size_t>(i) * N;
        const double* ai = A + static_cast<size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            const double a = ai[k];
            const double* bk = B + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) ci[j] += a * bk[j];
        }
    }
}

/// C(MxN) = A(MxK) * B(NxK)^T + C.
inline void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C) {
#pragma omp parallel for if (static_cast<long long>(M) * N * K > 65536)
    for (int i = 0; i < M; ++i) {
        const double* ai = A + static_cast<size_t>(i) * K;
        double* ci = C + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const double* bj = B + static_cast<size_t>(j) * K;
            double acc = 0.0;
            for (int k = 0; k < K; ++k) acc += ai[k] * bj[k];
            ci[j] += acc;
        }
    }
}

/// C(MxN) = A(KxM)^T * B(KxN) + C.
inline void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C) {
#pragma omp parallel for if (static_cast<long long>(M) * N * K > 65536)
    for (int i = 0; i < M; ++i) {
        double* ci = C + static_cast<size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const double a = A[static_cast<size_t>(k) * M + i];
            const double* bk = B + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) ci[j] += a * bk[j];
        }
    }
}

/// Unrolls one sample into a (channels*k*k) x (grid_h*grid_w) column matrix:
/// col[(c*k + ky)*k + kx][gy*grid_w + gx] = src(c, gy*stride - pad + ky, ...).
/// Out-of-range taps contribute zero.
inline void im2col(const double* src, int channels, int src_h, int src_w, int k, int stride,
                   int pad, int grid_h, int grid_w, double* col) {
    const size_t cols = static_cast<size_t>(grid_h) * grid_w;
    size_t row = 0;
    for (int c = 0; c < channels; ++c) {
        const double* plane = src + static_cast<size_t>(c) * src_h * src_w;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx, ++row) {
                double* out = col + row * cols;
                for (int gy = 0; gy < grid_h; ++gy) {
                    const int sy = gy * stride - pad + ky;
                    if (sy < 0 || sy >= src_h) {
                        std::fill(out + static_cast<size_t>(gy) * grid_w,
                                  out + static_cast<size_t>(gy + 1) * grid_w, 0.0);
                        continue;
                    }
                    const double* srow = plane + static_cast<size_t>(sy) * src_w;
                    for (int gx = 0; gx < grid_w; ++gx) {
                        const int sx = gx * stride - pad + kx;
                        out[static_cast<size_t>(gy) * grid_w + gx] =
                            (sx >= 0 && sx < src_w) ? srow[sx] : 0.0;
                    }
                }
            }
    }
}

/// Adjoint of im2col: scatter-adds the column matrix back into dst.
inline void col2im_add(const double* col, int channels, int dst_h, int dst_w, int k, int stride,
                       int pad, int grid_h, int grid_w, double* dst) {
    const size_t cols = static_cast<size_t>(grid_h) * grid_w;
    size_t row = 0;
    for (int c = 0; c < channels; ++c) {
        double* plane = dst + static_cast<size_t>(c) * dst_h * dst_w;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx, ++row) {
                const double* in = col + row * cols;
                for (int gy = 0; gy < grid_h; ++gy) {
                    const int dy = gy * stride - pad + ky;
                    if (dy < 0 || dy >= dst_h) continue;
                    double* drow = plane + static_cast<size_t>(dy) * dst_w;
                    for (int gx = 0; gx < grid_w; ++gx) {
                        const int dx = gx * stride - pad + kx;
                        if (dx >= 0 && dx < dst_w) drow[dx] += in[static_cast<size_t>(gy) * grid_w + gx];
                    }
                }
            }
    }
}

} // namespace detail

/// A named parameter vector together with its gradient and Adam moments.
struct ParamTensor {
    std::string name;
    std::vector<double> value, grad, m1, m2;

    ParamTensor(std::string name_, size_t size)
        : name(std::move(name_)), value(size, 0.0), grad(size, 0.0), m1(size, 0.0), m2(size, 0.0) {}

    size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

    void init_normal(SplitMix64& rng, double stddev) {
        for (double& x : value) x = stddev * normal_draw(rng);
    }
};

/// Bias-corrected Adam update for one parameter vector; t is the 1-based
/// step count.
inline void adam_step(std::span<double> params, std::span<const double> grads,
                      std::vector<double>& m1, std::vector<double>& m2, long t, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (params.size() != grads.size() || m1.size() != params.size() || m2.size() != params.size())
        throw std::invalid_argument("adam_step: size mismatch");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
        m1[i] = beta1 * m1[i] + (1.0 - beta1) * grads[i];
        m2[i] = beta2 * m2[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = m1[i] / bc1;
        const double vhat = m2[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

/// Adam over a set of parameter tensors with a shared step counter.
struct Adam {
    double lr;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;

    explicit Adam(double lr_) : lr(lr_) {}

    void step(const std::vector<ParamTensor*>& params) {
        ++t;
        for (ParamTensor* p : params)
            adam_step(p->value, p->grad, p->m1, p->m2, t, lr, beta1, beta2, eps);
    }
};

// ---------------------------------------------------------------------------
// Layers. forward() is const; backward() takes the forward input (or output
// where noted) and the output gradient, accumulates parameter gradients and
// returns the input gradient. Convolutions use cross-correlation semantics.
// ---------------------------------------------------------------------------

struct Conv2d {
    int in_ch, out_ch, ksize, stride, pad;
    ParamTensor w, b; // w laid out (out_ch, in_ch, k, k)

    Conv2d(std::string name, int in_ch_, int out_ch_, int k, int stride_, int pad_)
        : in_ch(in_ch_), out_ch(out_ch_), ksize(k), stride(stride_), pad(pad_),
          w(name + ".w", static_cast<size_t>(out_ch_) * in_ch_ * k * k), b(name + ".b", out_ch_) {}

    int out_dim(int in) const { return (in + 2 * pad - ksize) / stride + 1; }

    Tensor4 forward(const Tensor4& x) const {
        if (x.c != in_ch) throw std::invalid_argument("Conv2d: channel mismatch");
        const int oh = out_dim(x.h), ow = out_dim(x.w);
        if (oh <= 0 || ow <= 0) throw std::invalid_argument("Conv2d: non-positive output dims");
        Tensor4 out(x.n, out_ch, oh, ow);
        const int krows = in_ch * ksize * ksize;
        const size_t cols = static_cast<size_t>(oh) * ow;
        std::vector<double> col(static_cast<size_t>(krows) * cols);
        for (int i = 0; i < x.n; ++i) {
            detail::im2col(x.sample(i), in_ch, x.h, x.w, ksize, stride, pad, oh, ow, col.data());
            detail::gemm_nn(out_ch, static_cast<int>(cols), krows, w.value.data(), col.data(),
                            out.sample(i));
            for (int oc = 0; oc < out_ch; ++oc) {
                double* plane = out.sample(i) + static_cast<size_t>(oc) * cols;
                for (size_t p = 0; p < cols; ++p) plane[p] += b.value[oc];
            }
        }
        return out;
    }

    Tensor4 backward(const Tensor4& x, const Tensor4& gout) {
        const int oh = out_dim(x.h), ow = out_dim(x.w);
        if (gout.n != x.n || gout.c != out_ch || gout.h != oh || gout.w != ow)
            throw std::invalid_argument("Conv2d: gradient shape mismatch");
        const int krows = in_ch * ksize * ksize;
        const size_t cols = static_cast<size_t>(oh) * ow;
        std::vector<double> col(static_cast<size_t>(krows) * cols);
        std::vector<double> gcol(static_cast<size_t>(krows) * cols);
        Tensor4 gin(x.n, x.c, x.h, x.w, 0.0);
        for (int i = 0; i < x.n; ++i) {
            detail::im2col(x.sample(i), in_ch, x.h, x.w, ksize, stride, pad, oh, ow, col.data());
            const double* go = gout.sample(i);
            // dW += gout * col^T ; db += row sums of gout
            detail::gemm_nt(out_ch, krows, static_cast<int>(cols), go, col.data(), w.grad.data());
            for (int oc = 0; oc < out_ch; ++oc) {
                double acc = 0.0;
                const double* plane = go + static_cast<size_t>(oc) * cols;
                for (size_t p = 0; p < cols; ++p) acc += plane[p];
                b.grad[oc] += acc;
            }
            // dcol = W^T * gout ; dx = col2im(dcol)
            std::fill(gcol.begin(), gcol.end(), 0.0);
            detail::gemm_tn(krows, static_cast<int>(cols), out_ch, w.value.data(), go, gcol.data());
            detail::col2im_add(gcol.data(), in_ch, x.h, x.w, ksize, stride, pad, oh, ow,
                               gin.sample(i));
        }
        return gin;
    }
};

struct ConvTranspose2d {
    int in_ch, out_ch, ksize, stride, pad;
    ParamTensor w, b; // w laid out (in_ch, out_ch, k, k)

    ConvTranspose2d(std::string name, int in_ch_, int out_ch_, int k, int stride_, int pad_)
        : in_ch(in_ch_), out_ch(out_ch_), ksize(k), stride(stride_), pad(pad_),
          w(name + ".w", static_cast<size_t>(in_ch_) * out_ch_ * k * k), b(name + ".b", out_ch_) {}

    int out_dim(int in) const { return (in - 1) * stride - 2 * pad + ksize; }

    Tensor4 forward(const Tensor4& x) const {
        if (x.c != in_ch) throw std::invalid_argument("ConvTranspose2d: channel mismatch");
        const int oh = out_dim(x.h), ow = out_dim(x.w);
        if (oh <= 0 || ow <= 0)
            throw std::invalid_argument("ConvTranspose2d: non-positive output dims");
        Tensor4 out(x.n, out_ch, oh, ow);
        const int krows = out_ch * ksize * ksize;
        const size_t cols = static_cast<size_t>(x.h) * x.w;
        std::vector<double> col(static_cast<size_t>(krows) * cols);
        for (int i = 0; i < x.n; ++i) {
            // col = W^T * x, then scatter-add with the conv geometry reversed.
            std::fill(col.begin(), col.end(), 0.0);
            detail::gemm_tn(krows, static_cast<int>(cols), in_ch, w.value.data(), x.sample(i),
                            col.data());
            detail::col2im_add(col.data(), out_ch, oh, ow, ksize, stride, pad, x.h, x.w,
                               out.sample(i));
            for (int oc = 0; oc < out_ch; ++oc) {
                double* plane = out.sample(i) + static_cast<size_t>(oc) * oh * ow;
                for (size_t p = 0; p < static_cast<size_t>(oh) * ow; ++p) plane[p] += b.value[oc];
            }
        }
        return out;
    }

    Tensor4 backward(const Tensor4& x, const Tensor4& gout) {
        const int oh = out_dim(x.h), ow = out_dim(x.w);
        if (gout.n != x.n || gout.c != out_ch || gout.h != oh || gout.w != ow)
            throw std::invalid_argument("ConvTranspose2d: gradient shape mismatch");
        const int krows = out_ch * ksize * ksize;
        const size_t cols = static_cast<size_t>(x.h) * x.w;
        std::vector<double> col(static_cast<size_t>(krows) * cols);
        Tensor4 gin(x.n, x.c, x.h, x.w, 0.0);
        for (int i = 0; i < x.n; ++i) {
            detail::im2col(gout.sample(i), out_ch, oh, ow, ksize, stride, pad, x.h, x.w,
                           col.data());
            // dx = W * col ; dW += x * col^T ; db += plane sums of gout
            detail::gemm_nn(in_ch, static_cast<int>(cols), krows, w.value.data(), col.data(),
                            gin.sample(i));
            detail::gemm_nt(in_ch, krows, static_cast<int>(cols), x.sample(i), col.data(),
                            w.grad.data());
            const double* go = gout.sample(i);
            for (int oc = 0; oc < out_ch; ++oc) {
                double acc = 0.0;
                const double* plane = go + static_cast<size_t>(oc) * oh * ow;
                for (size_t p = 0; p < static_cast<size_t>(oh) * ow; ++p) acc += plane[p];
                b.grad[oc] += acc;
            }
        }
        return gin;
    }
};

struct Dense {
    int in_features, out_features;
    ParamTensor w, b; // w laid out (out, in)

    Dense(std::string name, int in_f, int out_f)
        : in_features(in_f), out_features(out_f),
          w(name + ".w", static_cast<size_t>(out_f) * in_f), b(name + ".b", out_f) {}

    /// Input is flattened per sample; output shape (n, out, 1, 1).
    Tensor4 forward(const Tensor4& x) const {
        if (x.sample_size() != static_cast<size_t>(in_features))
            throw std::invalid_argument("Dense: input feature mismatch");
        Tensor4 out(x.n, out_features, 1, 1);
        detail::gemm_nt(x.n, out_features, in_features, x.v.data(), w.value.data(), out.v.data());
        for (int i = 0; i < x.n; ++i)
            for (int j = 0; j < out_features; ++j) out.at(i, j, 0, 0) += b.value[j];
        return out;
    }

    Tensor4 backward(const Tensor4& x, const Tensor4& gout) {
        if (gout.n != x.n || gout.sample_size() != static_cast<size_t>(out_features))
            throw std::invalid_argument("Dense: gradient shape mismatch");
        // dW += gout^T * x ; db += column sums ; dx = gout * W
        detail::gemm_tn(out_features, in_features, x.n, gout.v.data(), x.v.data(), w.grad.data());
        for (int i = 0; i < x.n; ++i)
            for (int j = 0; j < out_features; ++j) b.grad[j] += gout.at(i, j, 0, 0);
        Tensor4 gin(x.n, x.c, x.h, x.w, 0.0);
        detail::gemm_nn(x.n, in_features, out_features, gout.v.data(), w.value.data(),
                        gin.v.data());
        return gin;
    }
};

// --- activations ------------------------------------------------------------

inline Tensor4 relu_forward(const Tensor4& x) {
    Tensor4 y = x;
    for (double& v : y.v) v = v > 0.0 ? v : 0.0;
    return y;
}

inline Tensor4 relu_backward(const Tensor4& x, const Tensor4& gout) {
    Tensor4 gin = gout;
    for (size_t i = 0; i < x.numel(); ++i)
        if (x.v[i] <= 0.0) gin.v[i] = 0.0;
    return gin;
}

inline Tensor4 leaky_relu_forward(const Tensor4& x, double slope = 0.2) {
    Tensor4 y = x;
    for (double& v : y.v) v = v > 0.0 ? v : slope * v;
    return y;
}

inline Tensor4 leaky_relu_backward(const Tensor4& x, const Tensor4& gout, double slope = 0.2) {
    Tensor4 gin = gout;
    for (size_t i = 0; i < x.numel(); ++i)
        if (x.v[i] <= 0.0) gin.v[i] *= slope;
    return gin;
}

inline Tensor4 tanh_forward(const Tensor4& x) {
    Tensor4 y = x;
    for (double& v : y.v) v = std::tanh(v);
    return y;
}

/// Takes the forward *output*.
inline Tensor4 tanh_backward(const Tensor4& y, const Tensor4& gout) {
    Tensor4 gin = gout;
    for (size_t i = 0; i < y.numel(); ++i) gin.v[i] *= 1.0 - y.v[i] * y.v[i];
    return gin;
}

inline Tensor4 sigmoid_forward(const Tensor4& x) {
    Tensor4 y = x;
    for (double& v : y.v) v = 1.0 / (1.0 + std::exp(-v));
    return y;
}

/// Takes the forward *output*.
inline Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& gout) {
    Tensor4 gin = gout;
    for (size_t i = 0; i < y.numel(); ++i) gin.v[i] *= y.v[i] * (1.0 - y.v[i]);
    return gin;
}

// --- pooling ----------------------------------------------------------------

/// Haar LL-subband pooling: each non-overlapping 2x2 block [a b; c d] maps to
/// (a+b+c+d)/2 (orthonormal low-low coefficient); detail subbands are
/// discarded. Halves both spatial dimensions.
inline Tensor4 haar_pool_forward(const Tensor4& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        throw std::invalid_argument("haar_pool_forward: spatial dims must be even");
    Tensor4 out(x.n, x.c, x.h / 2, x.w / 2);
    for (int i = 0; i < x.n; ++i)
        for (int j = 0; j < x.c; ++j)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx)
                    out.at(i, j, y, xx) = (x.at(i, j, 2 * y, 2 * xx) + x.at(i, j, 2 * y, 2 * xx + 1) +
                                           x.at(i, j, 2 * y + 1, 2 * xx) +
                                           x.at(i, j, 2 * y + 1, 2 * xx + 1)) /
                                          2.0;
    return out;
}

inline Tensor4 haar_pool_backward(const Tensor4& gout) {
    Tensor4 gin(gout.n, gout.c, gout.h * 2, gout.w * 2);
    for (int i = 0; i < gout.n; ++i)
        for (int j = 0; j < gout.c; ++j)
            for (int y = 0; y < gout.h; ++y)
                for (int xx = 0; xx < gout.w; ++xx) {
                    const double g = gout.at(i, j, y, xx) / 2.0;
                    gin.at(i, j, 2 * y, 2 * xx) = g;
                    gin.at(i, j, 2 * y, 2 * xx + 1) = g;
                    gin.at(i, j, 2 * y + 1, 2 * xx) = g;
                    gin.at(i, j, 2 * y + 1, 2 * xx + 1) = g;
                }
    return gin;
}

// --- losses -----------------------------------------------------------------

/// Per-sample softmax over the channel dimension of an (n, classes, 1, 1)
/// tensor.
inline Tensor4 softmax(const Tensor4& logits) {
    Tensor4 probs = logits;
    for (int i = 0; i < logits.n; ++i) {
        double* p = probs.sample(i);
        const size_t cdim = logits.sample_size();
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < cdim; ++j) mx = std::max(mx, p[j]);
        double sum = 0.0;
        for (size_t j = 0; j < cdim; ++j) {
            p[j] = std::exp(p[j] - mx);
            sum += p[j];
        }
        for (size_t j = 0; j < cdim; ++j) p[j] /= sum;
    }
    return probs;
}

/// Mean negative log-likelihood; probabilities clamped to [1e-12, 1].
inline double cross_entropy(const Tensor4& probs, const std::vector<int>& labels) {
    if (static_cast<size_t>(probs.n) != labels.size())
        throw std::invalid_argument("cross_entropy: label count mismatch");
    double loss = 0.0;
    for (int i = 0; i < probs.n; ++i) {
        const double p = std::clamp(probs.sample(i)[labels[i]], 1e-12, 1.0);
        loss -= std::log(p);
    }
    return loss / probs.n;
}

/// Fused softmax + cross-entropy; returns the mean loss and writes the
/// gradient with respect to the logits.
inline double softmax_cross_entropy(const Tensor4& logits, const std::vector<int>& labels,
                                    Tensor4& dlogits) {
    const Tensor4 probs = softmax(logits);
    const double loss = cross_entropy(probs, labels);
    dlogits = probs;
    const double inv_n = 1.0 / logits.n;
    for (int i = 0; i < logits.n; ++i) {
        double* d = dlogits.sample(i);
        const size_t cdim = logits.sample_size();
        for (size_t j = 0; j < cdim; ++j) d[j] *= inv_n;
        d[labels[i]] -= inv_n;
    }
    return loss;
}

/// Binary cross-entropy of a score in (0,1) against a (possibly smoothed)
/// target; the score is clamped away from {0, 1}.
inline double bce(double score, double target) {
    const double s = std::clamp(score, 1e-12, 1.0 - 1e-12);
    return -(target * std::log(s) + (1.0 - target) * std::log(1.0 - s));
}

/// Numerically stable mean BCE on raw scores (logits); also returns dlogits.
inline double bce_with_logits(const Tensor4& logits, const std::vector<double>& targets,
                              Tensor4& dlogits) {
    if (static_cast<size_t>(logits.n) != targets.size() || logits.sample_size() != 1)
        throw std::invalid_argument("bce_with_logits: shape mismatch");
    dlogits = logits;
    double loss = 0.0;
    const double inv_n = 1.0 / logits.n;
    for (int i = 0; i < logits.n; ++i) {
        const double z = logits.v[i];
        const double t = targets[i];
        loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
        const double s = 1.0 / (1.0 + std::exp(-z));
        dlogits.v[i] = (s - t) * inv_n;
    }
    return loss * inv_n;
}

// --- gradient verification ---------------------------------------------------

struct GradCheckEntry {
    std::string tensor;
    size_t checked = 0, total = 0;
    double max_rel_err = 0.0;
    size_t worst_index = 0;
    double analytic = 0.0, numeric = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    bool pass(double tol) const { return max_rel_err < tol; }
};

/// Central-difference verification of analytic gradients.
///
/// `loss(true)` must run forward+backward and accumulate gradients into the
/// parameter tensors (they are zeroed beforehand); `loss(false)` must run the
/// forward pass only. Relative error uses max(|analytic|, |numeric|, 1e-3) as
/// the denominator so near-zero gradients are compared absolutely. When
/// max_per_tensor > 0, at most that many seeded-random indices are checked
/// per tensor; 0 checks every parameter.
inline GradCheckReport grad_check(const std::vector<ParamTensor*>& params,
                                  const std::function<double(bool)>& loss, double h = 1e-5,
                                  size_t max_per_tensor = 0, uint64_t seed = 0) {
    for (ParamTensor* p : params) p->zero_grad();
    loss(true);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (ParamTensor* p : params) analytic.push_back(p->grad);

    GradCheckReport report;
    SplitMix64 rng(derive_seed(seed, 0x6772616463686bull)); // "gradchk"
    for (size_t pi = 0; pi < params.size(); ++pi) {
        ParamTensor& p = *params[pi];
        GradCheckEntry entry;
        entry.tensor = p.name;
        entry.total = p.size();

        std::vector<size_t> indices;
        if (max_per_tensor == 0 || max_per_tensor >= p.size()) {
            indices.resize(p.size());
            for (size_t i = 0; i < p.size(); ++i) indices[i] = i;
        } else {
            indices = sample_without_replacement(p.size(), max_per_tensor, rng);
        }

        for (size_t idx : indices) {
            const double saved = p.value[idx];
            p.value[idx] = saved + h;
            const double fp = loss(false);
            p.value[idx] = saved - h;
            const double fm = loss(false);
            p.value[idx] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[pi][idx];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
            if (rel > entry.max_rel_err) {
                entry.max_rel_err = rel;
                entry.worst_index = idx;
                entry.analytic = a;
                entry.numeric = numeric;
            }
            ++entry.checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

// --- serialization ------------------------------------------------------------

/// Flat little-endian parameter dump: magic, tensor count, then per tensor a
/// name, element count and raw doubles.
inline void save_params(const std::string& path, const std::vector<const ParamTensor*>& params) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_params: cannot open " + path);
    const char magic[8] = {'S', 'A', 'R', 'C', 'D', 'W', '0', '1'};
    f.write(magic, 8);
    const uint32_t count = static_cast<uint32_t>(params.size());
    f.write(reinterpret_cast<const char*>(&count), 4);
    for (const ParamTensor* p : params) {
        const uint32_t len = static_cast<uint32_t>(p->name.size());
        f.write(reinterpret_cast<const char*>(&len), 4);
        f.write(p->name.data(), len);
        const uint64_t n = p->size();
        f.write(reinterpret_cast<const char*>(&n), 8);
        f.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
    }
    if (!f) throw IoError("save_params: write failed for " + path);
}

/// Loads a parameter dump saved by save_params; names and sizes must match.
inline void load_params(const std::string& path, const std::vector<ParamTensor*>& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_params: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "SARCDW01", 8) != 0)
        throw ParseError("load_params: bad magic", 0);
    uint32_t count = 0;
    f.read(reinterpret_cast<char*>(&count), 4);
    if (!f || count != params.size())
        throw ParseError("load_params: tensor count mismatch", 8);
    for (ParamTensor* p : params) {
        uint32_t len = 0;
        f.read(reinterpret_cast<char*>(&len), 4);
        std::string name(len, '\0');
        f.read(name.data(), len);
        uint64_t n = 0;
        f.read(reinterpret_cast<char*>(&n), 8);
        if (!f || name != p->name || n != p->size())
            throw ParseError("load_params: tensor header mismatch for " + p->name,
                             static_cast<size_t>(f.tellg()));
        f.read(reinterpret_cast<char*>(p->value.data()),
               static_cast<std::streamsize>(n * sizeof(double)));
        if (!f) throw ParseError("load_params: truncated tensor " + p->name,
                                 static_cast<size_t>(f.tellg()));
    }
}

} // namespace sarcd
