// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sarcd/clustering.hpp"
#include "sarcd/di.hpp"
#include "sarcd/errors.hpp"
#include "sarcd/nets.hpp"
#include "sarcd/synth.hpp"

namespace sarcd {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad numeric value for " + key + ": '" + v + "'");
    }
}

inline long parse_long(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const long d = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad integer value for " + key + ": '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean value for " + key + ": '" + v + "'");
}

/// Applies `fn(key, value)` to every `key = value` line of a flat config
/// file. '#' starts a comment.
template <typename Fn>
void parse_kv_file(const std::string& path, Fn&& fn) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: missing '=' at " + path + ":" +
                                        std::to_string(lineno));
        fn(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

} // namespace detail

/// Every pipeline tunable with its default. Values are overridable from a
/// flat key=value file and from command-line flags.
struct PipelineConfig {
    // difference image
    int eta = 3;
    std::vector<int> scales{100, 500, 1000, 2000};
    std::array<double, 3> alpha{0.3, 0.4, 0.3};
    double epsilon = 1e-6;
    double compactness = 0.1;
    int slic_iters = 10;
    int otsu_bins = 256;
    // parallel clustering
    double mu1 = -0.2;
    double mu2 = 0.3;
    int gamma = 6;
    double beta = 0.5;
    double fuzzifier = 2.0;
    int n_p = 0; // 0: max(100, 1% of pixels)
    double fcm_tol = 1e-6;
    int fcm_max_iter = 100;
    // patches & networks
    int lambda = 14;
    double lr_cwnn = 1e-4;
    double lr_g = 3e-4;
    double lr_d = 6e-4;
    int cwnn_epochs = 12;
    int cwnn_batch = 64;
    int gan_epochs = 50;
    int gan_batches = 4;
    int gan_batch = 32;
    int n_t = 0; // 0: min(N2, max(4*N1, 512))
    // run control
    uint64_t seed = 1;
    bool skip_gan = false;

    DiConfig di() const {
        DiConfig c;
        c.eta = eta;
        c.scales = scales;
        c.alpha = alpha;
        c.epsilon = epsilon;
        c.compactness = compactness;
        c.slic_iters = slic_iters;
        c.otsu_bins = otsu_bins;
        c.validate();
        return c;
    }

    ParallelClusterConfig cluster() const {
        ParallelClusterConfig c;
        c.mu1 = mu1;
        c.mu2 = mu2;
        c.gamma = gamma;
        c.beta = beta;
        c.n_p = n_p;
        c.fcm.fuzzifier = fuzzifier;
        c.fcm.tol = fcm_tol;
        c.fcm.max_iter = fcm_max_iter;
        c.seed = derive_seed(seed, 0x636c7573ull);
        return c;
    }

    CwnnConfig cwnn() const {
        CwnnConfig c;
        c.lr = lr_cwnn;
        c.epochs = cwnn_epochs;
        c.batch = cwnn_batch;
        c.seed = derive_seed(seed, 0x63776eull);
        return c;
    }

    DcganConfig dcgan() const {
        DcganConfig c;
        c.lr_g = lr_g;
        c.lr_d = lr_d;
        c.epochs = gan_epochs;
        c.batches_per_epoch = gan_batches;
        c.batch = gan_batch;
        c.seed = derive_seed(seed, 0x67616e32ull);
        return c;
    }

    void set(const std::string& key, const std::string& value) {
        using detail::parse_bool;
        using detail::parse_double;
        using detail::parse_long;
        if (key == "eta") eta = static_cast<int>(parse_long(key, value));
        else if (key == "scales") {
            scales.clear();
            for (const auto& item : detail::split(value, ','))
                scales.push_back(static_cast<int>(parse_long(key, item)));
        } else if (key == "alpha") {
            const auto items = detail::split(value, ',');
            if (items.size() != 3) throw std::invalid_argument("config: alpha needs three values");
            for (int i = 0; i < 3; ++i) alpha[i] = parse_double(key, items[i]);
        }
        else if (key == "epsilon") epsilon = parse_double(key, value);
        else if (key == "compactness") compactness = parse_double(key, value);
        else if (key == "slic_iters") slic_iters = static_cast<int>(parse_long(key, value));
        else if (key == "otsu_bins") otsu_bins = static_cast<int>(parse_long(key, value));
        else if (key == "mu1") mu1 = parse_double(key, value);
        else if (key == "mu2") mu2 = parse_double(key, value);
        else if (key == "gamma") gamma = static_cast<int>(parse_long(key, value));
        else if (key == "beta") beta = parse_double(key, value);
        else if (key == "fuzzifier") fuzzifier = parse_double(key, value);
        else if (key == "n_p") n_p = static_cast<int>(parse_long(key, value));
        else if (key == "fcm_tol") fcm_tol = parse_double(key, value);
        else if (key == "fcm_max_iter") fcm_max_iter = static_cast<int>(parse_long(key, value));
        else if (key == "lambda") lambda = static_cast<int>(parse_long(key, value));
        else if (key == "lr_cwnn") lr_cwnn = parse_double(key, value);
        else if (key == "lr_g") lr_g = parse_double(key, value);
        else if (key == "lr_d") lr_d = parse_double(key, value);
        else if (key == "cwnn_epochs") cwnn_epochs = static_cast<int>(parse_long(key, value));
        else if (key == "cwnn_batch") cwnn_batch = static_cast<int>(parse_long(key, value));
        else if (key == "gan_epochs") gan_epochs = static_cast<int>(parse_long(key, value));
        else if (key == "gan_batches") gan_batches = static_cast<int>(parse_long(key, value));
        else if (key == "gan_batch") gan_batch = static_cast<int>(parse_long(key, value));
        else if (key == "n_t") n_t = static_cast<int>(parse_long(key, value));
        else if (key == "seed") seed = static_cast<uint64_t>(parse_long(key, value));
        else if (key == "skip_gan") skip_gan = parse_bool(key, value);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }

    static PipelineConfig from_file(const std::string& path) {
        PipelineConfig cfg;
        cfg.load(path);
        return cfg;
    }

    void load(const std::string& path) {
        detail::parse_kv_file(path, [this](const std::string& k, const std::string& v) {
            set(k, v);
        });
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"eta", eta},
                              {"scales", scales},
                              {"alpha", alpha},
                              {"epsilon", epsilon},
                              {"compactness", compactness},
                              {"slic_iters", slic_iters},
                              {"otsu_bins", otsu_bins},
                              {"mu1", mu1},
                              {"mu2", mu2},
                              {"gamma", gamma},
                              {"beta", beta},
                              {"fuzzifier", fuzzifier},
                              {"n_p", n_p},
                              {"fcm_tol", fcm_tol},
                              {"fcm_max_iter", fcm_max_iter},
                              {"lambda", lambda},
                              {"lr_cwnn", lr_cwnn},
                              {"lr_g", lr_g},
                              {"lr_d", lr_d},
                              {"cwnn_epochs", cwnn_epochs},
                              {"cwnn_batch", cwnn_batch},
                              {"gan_epochs", gan_epochs},
                              {"gan_batches", gan_batches},
                              {"gan_batch", gan_batch},
                              {"n_t", n_t},
                              {"seed", seed},
                              {"skip_gan", skip_gan}};
    }
};

/// Scene spec files share the key=value format.
inline SceneSpec scene_spec_from_file(const std::string& path) {
    SceneSpec s;
    detail::parse_kv_file(path, [&](const std::string& key, const std::string& value) {
        using detail::parse_double;
        using detail::parse_long;
        if (key == "width") s.width = static_cast<int>(parse_long(key, value));
        else if (key == "height") s.height = static_cast<int>(parse_long(key, value));
        else if (key == "changed_fraction") s.changed_fraction = parse_double(key, value);
        else if (key == "blob_count") s.blob_count = static_cast<int>(parse_long(key, value));
        else if (key == "blob_radius_min") s.blob_radius_min = parse_double(key, value);
        else if (key == "blob_radius_max") s.blob_radius_max = parse_double(key, value);
        else if (key == "looks") s.looks = parse_double(key, value);
        else if (key == "contrast") s.contrast = parse_double(key, value);
        else if (key == "seed") s.seed = static_cast<uint64_t>(parse_long(key, value));
        else throw std::invalid_argument("scene spec: unknown key '" + key + "'");
    });
    return s;
}

} // namespace sarcd
