// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "sarcd/features.hpp"
#include "sarcd/rng.hpp"

using namespace sarcd;

namespace {

Raster random_raster(int w, int h, uint64_t seed, double lo = 0.0, double hi = 1.0) {
    SplitMix64 rng(seed);
    Raster r(w, h);
    for (size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(lo, hi);
    return r;
}

/// Naive mirror-padded complex convolution; reference for the FFT path.
std::vector<double> gabor_magnitude_naive(const Raster& r, const GaborKernel& k) {
    std::vector<double> out(r.size());
    for (int y = 0; y < r.height(); ++y)
        for (int x = 0; x < r.width(); ++x) {
            std::complex<double> acc(0.0, 0.0);
            for (int dy = -k.half; dy <= k.half; ++dy)
                for (int dx = -k.half; dx <= k.half; ++dx)
                    acc += k.at(dy, dx) * r.at_reflect(y - dy, x - dx);
            out[static_cast<size_t>(y) * r.width() + x] = std::abs(acc);
        }
    return out;
}

} // namespace

TEST_CASE("sigmoid_map evaluates the shifted logistic") {
    CHECK(sigmoid_map(Raster(1, 1, {0.0}), 0.0)[0] == Catch::Approx(0.5).margin(1e-12));
    // Oracle: 1 / (1 + e^-0.5) = 0.6224593...
    CHECK(sigmoid_map(Raster(1, 1, {0.2}), 0.3)[0] ==
          Catch::Approx(0.6224593312018546).margin(1e-12));
    CHECK(sigmoid_map(Raster(1, 1, {40.0}), 0.0)[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(sigmoid_map(Raster(1, 1, {40.0}), 0.0)[0] < 1.0 + 1e-15);
}

TEST_CASE("sigmoid_map preserves ranking and stays in (0,1)") {
    const Raster r = random_raster(16, 16, 1, -4.0, 4.0);
    const Raster out = sigmoid_map(r, 0.3);
    for (size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i] > 0.0);
        CHECK(out[i] < 1.0);
    }
    for (size_t i = 1; i < out.size(); ++i) {
        if (r[i] > r[i - 1]) CHECK(out[i] > out[i - 1]);
        if (r[i] < r[i - 1]) CHECK(out[i] < out[i - 1]);
    }
}

TEST_CASE("build_gabor_bank shape and spacing") {
    const GaborBank bank = build_gabor_bank(6);
    CHECK(bank.kernels.size() == 48);
    CHECK(bank.scales == 6);
    for (int s = 0; s < 6; ++s)
        for (int o = 0; o < 8; ++o) {
            const GaborKernel& k = bank.kernel(s, o);
            CHECK(k.theta == Catch::Approx(o * std::numbers::pi / 8.0).margin(1e-15));
            CHECK(k.wavelength == Catch::Approx(4.0 * std::pow(2.0, 0.5 * s)).margin(1e-12));
            for (const auto& w : k.weights) {
                CHECK(std::isfinite(w.real()));
                CHECK(std::isfinite(w.imag()));
            }
        }
    CHECK_THROWS_AS(build_gabor_bank(0), std::invalid_argument);
}

TEST_CASE("gabor kernels are DC-free") {
    const GaborBank bank = build_gabor_bank(3);
    for (const GaborKernel& k : bank.kernels) {
        std::complex<double> sum(0.0, 0.0);
        for (const auto& w : k.weights) sum += w;
        CHECK(std::abs(sum.real()) < 1e-10);
        CHECK(std::abs(sum.imag()) < 1e-10);
    }
}

TEST_CASE("gabor kernel at theta + pi/2 is the 90-degree rotation") {
    const GaborBank bank = build_gabor_bank(2);
    for (int s = 0; s < 2; ++s)
        for (int o = 0; o < 4; ++o) {
            const GaborKernel& a = bank.kernel(s, o);
            const GaborKernel& b = bank.kernel(s, o + 4);
            REQUIRE(a.size == b.size);
            // Rotating the sampling grid by 90 degrees: (row, col) -> (-col, row).
            for (int dy = -a.half; dy <= a.half; ++dy)
                for (int dx = -a.half; dx <= a.half; ++dx) {
                    const auto rotated = a.at(-dx, dy);
                    CHECK(b.at(dy, dx).real() == Catch::Approx(rotated.real()).margin(1e-9));
                    CHECK(b.at(dy, dx).imag() == Catch::Approx(rotated.imag()).margin(1e-9));
                }
        }
}

TEST_CASE("fft convolution matches the naive oracle") {
    const Raster r = random_raster(20, 14, 2, -1.0, 1.0);
    const GaborBank bank = build_gabor_bank(2);
    detail::GaborConvolver conv(r, bank.max_half());
    for (int s = 0; s < 2; ++s)
        for (int o = 0; o < 8; o += 3) {
            const GaborKernel& k = bank.kernel(s, o);
            const auto fft = conv.magnitude(k);
            const auto naive = gabor_magnitude_naive(r, k);
            for (size_t i = 0; i < fft.size(); ++i)
                CHECK(fft[i] == Catch::Approx(naive[i]).margin(1e-10));
        }
}

TEST_CASE("gabor_features of a constant image are uniform") {
    const Raster r(32, 32, 0.7);
    const GaborBank bank = build_gabor_bank(3);
    const FeatureField f = gabor_features(r, bank);
    REQUIRE(f.dim == 3);
    for (size_t p = 0; p < f.samples(); ++p)
        for (int d = 0; d < f.dim; ++d)
            CHECK(f.sample(p)[d] == Catch::Approx(f.sample(0)[d]).margin(1e-9));
}

TEST_CASE("gabor_features picks the edge-aligned orientation at a step edge") {
    // Vertical step edge: the wave vector that maximizes the response runs
    // along x, i.e. orientation index 0.
    Raster r(48, 48, 0.0);
    for (int y = 0; y < 48; ++y)
        for (int x = 24; x < 48; ++x) r.at(y, x) = 1.0;
    const GaborBank bank = build_gabor_bank(3);
    detail::GaborConvolver conv(r, bank.max_half());
    for (int s = 0; s < 3; ++s) {
        std::vector<std::vector<double>> responses;
        for (int o = 0; o < 8; ++o) responses.push_back(conv.magnitude(bank.kernel(s, o)));
        for (int y = 20; y < 28; ++y) {
            const size_t p = static_cast<size_t>(y) * 48 + 24; // on the edge
            int argmax = 0;
            for (int o = 1; o < 8; ++o)
                if (responses[o][p] > responses[argmax][p]) argmax = o;
            CHECK(argmax == 0);
        }
    }
}

TEST_CASE("gabor_features equal the max over per-orientation responses") {
    const Raster r = random_raster(24, 18, 3);
    const GaborBank bank = build_gabor_bank(2);
    const FeatureField f = gabor_features(r, bank);
    detail::GaborConvolver conv(r, bank.max_half());
    for (int s = 0; s < 2; ++s) {
        std::vector<std::vector<double>> responses;
        for (int o = 0; o < 8; ++o) responses.push_back(conv.magnitude(bank.kernel(s, o)));
        for (size_t p = 0; p < r.size(); ++p) {
            double mx = 0.0;
            for (int o = 0; o < 8; ++o) mx = std::max(mx, responses[o][p]);
            CHECK(f.sample(p)[s] == Catch::Approx(mx).margin(1e-12));
        }
    }
}

TEST_CASE("gabor_features are translation-equivariant away from borders") {
    const int shift = 4;
    const Raster base = random_raster(40, 40, 4);
    Raster shifted(40, 40, 0.0);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x)
            shifted.at(y, x) = base.at_reflect(y - shift, x - shift);

    const GaborBank bank = build_gabor_bank(1); // half = 6, small support
    const int guard = bank.max_half() + shift;
    const FeatureField fa = gabor_features(base, bank);
    const FeatureField fb = gabor_features(shifted, bank);
    for (int y = guard; y < 40 - guard; ++y)
        for (int x = guard; x < 40 - guard; ++x) {
            const size_t pa = static_cast<size_t>(y) * 40 + x;
            const size_t pb = static_cast<size_t>(y + shift) * 40 + (x + shift);
            for (int d = 0; d < fa.dim; ++d)
                CHECK(fb.sample(pb)[d] == Catch::Approx(fa.sample(pa)[d]).margin(1e-9));
        }
}

TEST_CASE("gabor feature magnitudes are invariant to 90-degree image rotation") {
    // The orientation set is closed under +pi/2, so the max-over-orientations
    // magnitude at the image centre survives rotation by 90 degrees.
    const int n = 33;
    Raster r(n, n, 0.0);
    SplitMix64 rng(5);
    for (size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(-1.0, 1.0);
    Raster rot(n, n, 0.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) rot.at(x, n - 1 - y) = r.at(y, x);

    const GaborBank bank = build_gabor_bank(1);
    const FeatureField fa = gabor_features(r, bank);
    const FeatureField fb = gabor_features(rot, bank);
    const int c = n / 2; // centre maps to itself
    for (int d = 0; d < fa.dim; ++d)
        CHECK(fb.sample(static_cast<size_t>(c) * n + c)[d] ==
              Catch::Approx(fa.sample(static_cast<size_t>(c) * n + c)[d]).margin(1e-9));
}
