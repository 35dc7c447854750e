// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "sarcd/raster.hpp"

namespace sarcd {

/// Sigmoid intensity mapping 1 / (1 + exp(-(x + mu))).
inline Raster sigmoid_map(const Raster& r, double mu) {
    Raster out(r.width(), r.height());
    for (size_t i = 0; i < r.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-(r[i] + mu)));
    return out;
}

/// One complex Gabor kernel sampled on a (2*half+1)^2 grid.
struct GaborKernel {
    int half = 0;
    int size = 0;
    double wavelength = 0.0;
    double sigma = 0.0;
    double theta = 0.0;
    std::vector<std::complex<double>> weights; // row-major, centre at (half, half)

    std::complex<double> at(int dy, int dx) const {
        return weights[static_cast<size_t>(dy + half) * size + (dx + half)];
    }
};

/// gamma scales x 8 orientations of complex Gabor kernels.
struct GaborBank {
    int scales = 0;
    int orientations = 8;
    std::vector<GaborKernel> kernels; // kernels[s * orientations + o]

    const GaborKernel& kernel(int scale, int orientation) const {
        return kernels[static_cast<size_t>(scale) * orientations + orientation];
    }

    int max_half() const {
        int m = 0;
        for (const auto& k : kernels) m = std::max(m, k.half);
        return m;
    }
};

/// Per-pixel feature vectors, pixel-major layout.
struct FeatureField {
    int width = 0;
    int height = 0;
    int dim = 0;
    std::vector<double> data; // data[(row * width + col) * dim + d]

    const double* sample(size_t pixel) const { return data.data() + pixel * dim; }
    double* sample(size_t pixel) { return data.data() + pixel * dim; }
    size_t samples() const { return static_cast<size_t>(width) * height; }
};

namespace detail {

inline GaborKernel make_gabor_kernel(double wavelength, double theta) {
    constexpr double kSigmaRatio = 0.56; // envelope width relative to wavelength
    constexpr double kAspect = 0.5;      // elongation across the wave direction
    constexpr double kTruncate = 2.5;    // envelope radii kept

    GaborKernel k;
    k.wavelength = wavelength;
    k.sigma = kSigmaRatio * wavelength;
    k.theta = theta;
    k.half = std::max(2, static_cast<int>(std::ceil(kTruncate * k.sigma)));
    k.size = 2 * k.half + 1;
    k.weights.resize(static_cast<size_t>(k.size) * k.size);

    const double c = std::cos(theta), s = std::sin(theta);
    const double inv_two_sigma_sq = 1.0 / (2.0 * k.sigma * k.sigma);
    const double freq = 2.0 * std::numbers::pi / wavelength;

    double env_sum = 0.0, real_sum = 0.0;
    std::vector<double> envelope(k.weights.size());
    for (int dy = -k.half; dy <= k.half; ++dy)
        for (int dx = -k.half; dx <= k.half; ++dx) {
            const double xr = dx * c + dy * s;
            const double yr = -dx * s + dy * c;
            const double env =
                std::exp(-(xr * xr + kAspect * kAspect * yr * yr) * inv_two_sigma_sq);
            const size_t idx = static_cast<size_t>(dy + k.half) * k.size + (dx + k.half);
            envelope[idx] = env;
            k.weights[idx] = env * std::complex<double>(std::cos(freq * xr), std::sin(freq * xr));
            env_sum += env;
            real_sum += k.weights[idx].real();
        }
    // Remove the DC gain of the cosine part so a constant image produces zero
    // response; the sine part is odd-symmetric and already integrates to zero.
    const double dc = real_sum / env_sum;
    for (size_t i = 0; i < k.weights.size(); ++i)
        k.weights[i] -= std::complex<double>(dc * envelope[i], 0.0);
    return k;
}

inline std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

/// Mirror-padded 2-D convolution of a raster with a set of complex kernels
/// sharing one padded frame; returns |response| rasters.
class GaborConvolver {
public:
    GaborConvolver(const Raster& image, int pad)
        : w_(image.width()), h_(image.height()), pad_(pad), pw_(w_ + 2 * pad), ph_(h_ + 2 * pad) {
        const size_t pn = static_cast<size_t>(pw_) * ph_;
        image_fft_.resize(pn);
        kernel_buf_.resize(pn);
        work_.resize(pn);

        // Reflect-padded image into the frequency domain.
        std::vector<std::complex<double>> padded(pn);
        for (int y = 0; y < ph_; ++y) {
            const int sy = reflect_index(y - pad_, h_);
            for (int x = 0; x < pw_; ++x)
                padded[static_cast<size_t>(y) * pw_ + x] = image.at(sy, reflect_index(x - pad_, w_));
        }
        {
            std::lock_guard<std::mutex> lk(fftw_plan_mutex());
            fwd_ = fftw_plan_dft_2d(ph_, pw_, as_fftw(padded.data()), as_fftw(image_fft_.data()),
                                    FFTW_FORWARD, FFTW_ESTIMATE);
            kfwd_ = fftw_plan_dft_2d(ph_, pw_, as_fftw(kernel_buf_.data()), as_fftw(work_.data()),
                                     FFTW_FORWARD, FFTW_ESTIMATE);
            inv_ = fftw_plan_dft_2d(ph_, pw_, as_fftw(work_.data()), as_fftw(kernel_buf_.data()),
                                    FFTW_BACKWARD, FFTW_ESTIMATE);
        }
        fftw_execute(fwd_);
    }

    ~GaborConvolver() {
        std::lock_guard<std::mutex> lk(fftw_plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(kfwd_);
        fftw_destroy_plan(inv_);
    }

    GaborConvolver(const GaborConvolver&) = delete;
    GaborConvolver& operator=(const GaborConvolver&) = delete;

    /// |(image * kernel)| cropped back to the original dimensions.
    std::vector<double> magnitude(const GaborKernel& k) {
        if (k.half > pad_) throw std::invalid_argument("GaborConvolver: kernel exceeds padding");
        const size_t pn = kernel_buf_.size();
        std::fill(kernel_buf_.begin(), kernel_buf_.end(), std::complex<double>(0.0, 0.0));
        // Kernel centred at the origin of the circular frame.
        for (int dy = -k.half; dy <= k.half; ++dy)
            for (int dx = -k.half; dx <= k.half; ++dx) {
                const int y = (dy + ph_) % ph_;
                const int x = (dx + pw_) % pw_;
                kernel_buf_[static_cast<size_t>(y) * pw_ + x] = k.at(dy, dx);
            }
        fftw_execute(kfwd_); // kernel_buf_ -> work_
        const double norm = 1.0 / static_cast<double>(pn);
        for (size_t i = 0; i < pn; ++i) work_[i] *= image_fft_[i] * norm;
        fftw_execute(inv_); // work_ -> kernel_buf_

        std::vector<double> out(static_cast<size_t>(w_) * h_);
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x)
                out[static_cast<size_t>(y) * w_ + x] =
                    std::abs(kernel_buf_[static_cast<size_t>(y + pad_) * pw_ + (x + pad_)]);
        return out;
    }

private:
    static fftw_complex* as_fftw(std::complex<double>* p) {
        return reinterpret_cast<fftw_complex*>(p);
    }

    int w_, h_, pad_, pw_, ph_;
    std::vector<std::complex<double>> image_fft_, kernel_buf_, work_;
    fftw_plan fwd_{}, kfwd_{}, inv_{};
};

} // namespace detail

/// Gabor bank with geometrically spaced wavelengths (4 * 2^(s/2) pixels) and
/// eight orientations k*pi/8.
inline GaborBank build_gabor_bank(int gamma) {
    if (gamma < 1) throw std::invalid_argument("build_gabor_bank: gamma must be >= 1");
    GaborBank bank;
    bank.scales = gamma;
    bank.kernels.reserve(static_cast<size_t>(gamma) * bank.orientations);
    for (int s = 0; s < gamma; ++s) {
        const double wavelength = 4.0 * std::pow(2.0, 0.5 * s);
        for (int o = 0; o < bank.orientations; ++o) {
            const double theta = o * std::numbers::pi / bank.orientations;
            bank.kernels.push_back(detail::make_gabor_kernel(wavelength, theta));
        }
    }
    return bank;
}

/// Per pixel and per scale, the maximum response magnitude over the eight
/// orientations. Borders are mirror padded.
inline FeatureField gabor_features(const Raster& r, const GaborBank& bank) {
    FeatureField f;
    f.width = r.width();
    f.height = r.height();
    f.dim = bank.scales;
    f.data.assign(r.size() * static_cast<size_t>(bank.scales), 0.0);

    detail::GaborConvolver conv(r, bank.max_half());
    for (int s = 0; s < bank.scales; ++s) {
        for (int o = 0; o < bank.orientations; ++o) {
            const std::vector<double> mag = conv.magnitude(bank.kernel(s, o));
            for (size_t p = 0; p < mag.size(); ++p) {
                double& slot = f.data[p * bank.scales + s];
                if (o == 0 || mag[p] > slot) slot = mag[p];
            }
        }
    }
    return f;
}

} // namespace sarcd
