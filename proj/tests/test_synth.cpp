// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sarcd/synth.hpp"

using namespace sarcd;

TEST_CASE("gen_scene is deterministic in the seed") {
    SceneSpec spec;
    spec.width = 96;
    spec.height = 96;
    spec.seed = 5;
    const Scene a = gen_scene(spec);
    const Scene b = gen_scene(spec);
    CHECK(a.reflectivity1.samples() == b.reflectivity1.samples());
    CHECK(a.reflectivity2.samples() == b.reflectivity2.samples());
    CHECK(a.mask.samples() == b.mask.samples());

    spec.seed = 6;
    const Scene c = gen_scene(spec);
    CHECK(a.mask.samples() != c.mask.samples());
}

TEST_CASE("gen_scene hits the requested changed fraction within 20%") {
    SceneSpec spec;
    spec.width = 400;
    spec.height = 400;
    spec.changed_fraction = 1.0 / 150.0;
    spec.blob_count = 40;
    spec.seed = 7;
    const Scene scene = gen_scene(spec);
    long count = 0;
    for (size_t p = 0; p < scene.mask.size(); ++p) count += scene.mask[p] > 0.0 ? 1 : 0;
    CHECK(count >= 850);
    CHECK(count <= 1280);
}

TEST_CASE("gen_scene background stays within [0.2, 1.0]") {
    SceneSpec spec;
    spec.width = 64;
    spec.height = 64;
    spec.seed = 8;
    const Scene scene = gen_scene(spec);
    for (size_t p = 0; p < scene.reflectivity1.size(); ++p) {
        CHECK(scene.reflectivity1[p] >= 0.2);
        CHECK(scene.reflectivity1[p] <= 1.0);
    }
}

TEST_CASE("gen_scene mask marks exactly the differing pixels") {
    SceneSpec spec;
    spec.width = 80;
    spec.height = 60;
    spec.seed = 9;
    const Scene scene = gen_scene(spec);
    for (size_t p = 0; p < scene.mask.size(); ++p) {
        const bool differs = scene.reflectivity1[p] != scene.reflectivity2[p];
        CHECK(differs == (scene.mask[p] > 0.0));
        if (scene.mask[p] > 0.0)
            CHECK(scene.reflectivity2[p] ==
                  Catch::Approx(scene.reflectivity1[p] * spec.contrast).margin(1e-12));
    }
}

TEST_CASE("gen_scene rejects unreachable fractions") {
    SceneSpec spec;
    spec.width = 64;
    spec.height = 64;
    spec.changed_fraction = 0.0001; // target 0.4 pixels
    spec.blob_radius_min = 0.0;
    spec.blob_radius_max = 0.0;
    spec.seed = 10;
    CHECK_THROWS_AS(gen_scene(spec), GenerationError);
}

TEST_CASE("gen_scene validates its spec") {
    SceneSpec spec;
    spec.changed_fraction = 0.6;
    CHECK_THROWS_AS(gen_scene(spec), std::invalid_argument);
    spec = SceneSpec{};
    spec.contrast = 1.0;
    CHECK_THROWS_AS(gen_scene(spec), std::invalid_argument);
    spec = SceneSpec{};
    spec.looks = 0.5;
    CHECK_THROWS_AS(gen_scene(spec), std::invalid_argument);
}

TEST_CASE("speckle is multiplicative, positive and unit-mean") {
    const Raster flat(256, 256, 2.0);
    const Raster noisy = speckle(flat, 4.0, 11);
    double mean = 0.0;
    for (size_t p = 0; p < noisy.size(); ++p) {
        CHECK(noisy[p] > 0.0);
        mean += noisy[p];
    }
    mean /= static_cast<double>(noisy.size());
    // Law of large numbers: sample mean within 2% of the reflectivity.
    CHECK(std::abs(mean - 2.0) / 2.0 < 0.02);
}

TEST_CASE("speckle coefficient of variation tracks 1/sqrt(looks)") {
    for (double looks : {1.0, 4.0, 16.0}) {
        const Raster flat(256, 256, 1.0);
        const Raster noisy = speckle(flat, looks, 12);
        double mean = 0.0;
        for (size_t p = 0; p < noisy.size(); ++p) mean += noisy[p];
        mean /= static_cast<double>(noisy.size());
        double var = 0.0;
        for (size_t p = 0; p < noisy.size(); ++p)
            var += (noisy[p] - mean) * (noisy[p] - mean);
        var /= static_cast<double>(noisy.size());
        const double cov = std::sqrt(var) / mean;
        const double expect = 1.0 / std::sqrt(looks);
        CHECK(std::abs(cov - expect) / expect < 0.15);
    }
}

TEST_CASE("speckle with very many looks concentrates on the reflectivity") {
    const Raster flat(128, 128, 3.0);
    const Raster noisy = speckle(flat, 10000.0, 13);
    long within = 0;
    for (size_t p = 0; p < noisy.size(); ++p)
        if (std::abs(noisy[p] - 3.0) / 3.0 < 0.05) ++within;
    CHECK(static_cast<double>(within) / static_cast<double>(noisy.size()) > 0.99);
}

TEST_CASE("speckle is order-independent (counter-indexed streams)") {
    const Raster flat(64, 64, 1.0);
    const Raster a = speckle(flat, 4.0, 14);
    const Raster b = speckle(flat, 4.0, 14);
    CHECK(a.samples() == b.samples());
    CHECK_THROWS_AS(speckle(flat, 0.5, 1), std::invalid_argument);
}
