// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sarcd/clustering.hpp"
#include "sarcd/config.hpp"
#include "sarcd/di.hpp"
#include "sarcd/eval.hpp"
#include "sarcd/nets.hpp"
#include "sarcd/nn.hpp"
#include "sarcd/pgm.hpp"
#include "sarcd/pipeline.hpp"
#include "sarcd/sampling.hpp"
#include "sarcd/synth.hpp"

using namespace sarcd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, double seconds,
            const std::string& detail = "") {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << id << ": " << name << " ("
              << seconds << " s)";
    if (!detail.empty()) std::cout << " -- " << detail;
    std::cout << "\n" << std::flush;
    if (!pass) ++failures;
}

void run_criterion(int id, const std::string& name, const std::function<bool(std::string&)>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = false;
    try {
        pass = fn(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, name, pass, seconds, detail);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SARCD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

ConfusionCounts counts_from(long long fa, long long md, long long n_c, long long n_uc) {
    ConfusionCounts c;
    c.fp = fa;
    c.fn = md;
    c.tp = n_c - md;
    c.tn = n_uc - fa;
    return c;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// --- criteria ---------------------------------------------------------------

bool metric_oracle_table_d(std::string& detail) {
    const Metrics m = metrics(counts_from(279, 217, 4685, 60851));
    std::ostringstream os;
    os << "PCC=" << m.pcc * 100 << " P_FA=" << m.p_fa * 100 << " P_MD=" << m.p_md * 100
       << " F1=" << m.f1 * 100 << " KC=" << m.kc * 100;
    detail = os.str();
    return std::abs(m.pcc * 100 - 99.24) <= 0.01 && std::abs(m.p_fa * 100 - 5.88) <= 0.01 &&
           std::abs(m.p_md * 100 - 4.63) <= 0.01 && std::abs(m.f1 * 100 - 94.74) <= 0.01 &&
           std::abs(m.kc * 100 - 94.33) <= 0.05;
}

bool pcc_oracle_overall(std::string& detail) {
    const double a = metrics(counts_from(390, 241, 1066, 158934)).pcc * 100;
    const double b = metrics(counts_from(596, 315, 1492, 158508)).pcc * 100;
    const double c = metrics(counts_from(196, 1406, 3467, 156533)).pcc * 100;
    std::ostringstream os;
    os << "PCC=" << a << ", " << b << ", " << c;
    detail = os.str();
    return std::abs(a - 99.61) <= 0.01 && std::abs(b - 99.43) <= 0.01 &&
           std::abs(c - 99.00) <= 0.01;
}

bool clustering_invariants(std::string& detail) {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SplitMix64 rng(1000 + seed);
        const int n = 300, dim = 2;
        std::vector<double> x(static_cast<size_t>(n) * dim);
        for (double& v : x) v = rng.uniform(-3.0, 3.0);
        std::vector<double> pre{rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0),
                                rng.uniform(-2.0, -0.5), rng.uniform(-2.0, -0.5)};

        const FcmResult res = tccfcm_stage2(x.data(), n, dim, pre, 0.5, {});
        for (int i = 0; i < n; ++i) {
            const double col = res.membership.at(0, i) + res.membership.at(1, i);
            if (std::abs(col - 1.0) > 1e-9) {
                detail = "membership column sum off at seed " + std::to_string(seed);
                return false;
            }
        }
        for (size_t t = 1; t < res.model.objective_trace.size(); ++t)
            if (res.model.objective_trace[t] > res.model.objective_trace[t - 1] + 1e-9) {
                detail = "objective increased at seed " + std::to_string(seed);
                return false;
            }

        const FcmResult anchored = tccfcm_stage2(x.data(), n, dim, pre, 0.0, {});
        const FcmResult plain = fcm_from_centres(x.data(), n, dim, {}, pre);
        if (anchored.model.centres != plain.model.centres ||
            anchored.membership.u != plain.membership.u ||
            anchored.model.objective_trace != plain.model.objective_trace) {
            detail = "beta=0 trajectory diverged from plain FCM at seed " + std::to_string(seed);
            return false;
        }
    }
    detail = "100 seeds";
    return true;
}

bool imbalance_robustness(std::string& detail) {
    int wins = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        SplitMix64 rng(2000 + seed);
        const int majority = 2000, minority = 20;
        std::vector<double> x;
        x.reserve(majority + minority);
        for (int i = 0; i < majority; ++i) x.push_back(0.0 + 0.5 * normal_draw(rng));
        for (int i = 0; i < minority; ++i) x.push_back(5.0 + 0.5 * normal_draw(rng));
        const int n = static_cast<int>(x.size());

        const FcmResult plain = fcm(x.data(), n, 1, {}, 3000 + seed);
        const double plain_err =
            std::abs(std::max(plain.model.centres[0], plain.model.centres[1]) - 5.0);

        FeatureField f;
        f.width = n;
        f.height = 1;
        f.dim = 1;
        f.data = x;
        const std::vector<double> pre = tccfcm_stage1(x, f, 100, {}, 3000 + seed);
        const FcmResult anchored = tccfcm_stage2(x.data(), n, 1, pre, 0.5, {});
        const double anchored_err = std::abs(anchored.model.centres[0] - 5.0);

        if (anchored_err <= 0.5 * plain_err) ++wins;
    }
    detail = std::to_string(wins) + "/10 seeds";
    return wins >= 8;
}

/// Exhaustive finite-difference checks for every layer type on small tensors,
/// plus sampled whole-network checks for both architectures.
bool gradient_suite(std::string& detail) {
    double worst = 0.0;
    auto track = [&](const GradCheckReport& r) { worst = std::max(worst, r.max_rel_err); };

    {
        // Small composite exercising conv, transpose conv, dense, haar pool
        // and every activation, checked on every parameter.
        Conv2d conv("c", 1, 3, 3, 1, 1);
        ConvTranspose2d deconv("d", 3, 2, 4, 2, 1);
        Dense fc("f", 2 * 4 * 4, 3); // 4x4 input -> deconv 8x8 -> pooled 4x4
        SplitMix64 rng(41);
        conv.w.init_normal(rng, 0.4);
        conv.b.init_normal(rng, 0.1);
        deconv.w.init_normal(rng, 0.4);
        deconv.b.init_normal(rng, 0.1);
        fc.w.init_normal(rng, 0.2);
        fc.b.init_normal(rng, 0.1);
        Tensor4 x(2, 1, 4, 4);
        for (double& v : x.v) v = normal_draw(rng);
        const std::vector<int> labels{0, 2};
        std::vector<ParamTensor*> params{&conv.w, &conv.b, &deconv.w,
                                         &deconv.b, &fc.w,  &fc.b};
        auto loss = [&](bool want) {
            Tensor4 c1 = conv.forward(x);
            Tensor4 a1 = leaky_relu_forward(c1);
            Tensor4 d1 = deconv.forward(a1);
            Tensor4 a2 = tanh_forward(d1);
            Tensor4 p1 = haar_pool_forward(a2);
            Tensor4 a3 = sigmoid_forward(p1);
            Tensor4 flat(a3.n, static_cast<int>(a3.sample_size()), 1, 1);
            flat.v = a3.v;
            Tensor4 logits = fc.forward(flat);
            Tensor4 dlogits;
            const double l = softmax_cross_entropy(logits, labels, dlogits);
            if (want) {
                Tensor4 dflat = fc.backward(flat, dlogits);
                Tensor4 da3(a3.n, a3.c, a3.h, a3.w);
                da3.v = dflat.v;
                Tensor4 dp1 = sigmoid_backward(a3, da3);
                Tensor4 da2 = haar_pool_backward(dp1);
                Tensor4 dd1 = tanh_backward(a2, da2);
                Tensor4 da1 = deconv.backward(a1, dd1);
                Tensor4 dc1 = leaky_relu_backward(c1, da1);
                conv.backward(x, dc1);
            }
            return l;
        };
        track(grad_check(params, loss, 1e-5, 0, 42));
    }
    {
        // Full classifier, dense sampling.
        CwnnModel model(28);
        model.init(43);
        SplitMix64 rng(44);
        Tensor4 x(2, 1, 28, 28);
        for (double& v : x.v) v = 0.5 * normal_draw(rng);
        const std::vector<int> labels{0, 1};
        auto loss = [&](bool want) {
            CwnnModel::Cache cache;
            Tensor4 logits = model.forward_logits(x, want ? &cache : nullptr);
            Tensor4 dlogits;
            const double l = softmax_cross_entropy(logits, labels, dlogits);
            if (want) model.backward(cache, dlogits);
            return l;
        };
        track(grad_check(model.params(), loss, 1e-5, 1200, 45));
    }
    {
        // Full generator/discriminator stack.
        DcganModel model;
        model.g.init(46);
        model.d.init(47);
        SplitMix64 rng(48);
        const Tensor4 z = dcgan_noise(2, rng);
        const std::vector<double> targets{0.9, 0.1};
        auto loss = [&](bool want) {
            DcganGenerator::Cache gc;
            DcganDiscriminator::Cache dc;
            Tensor4 fake = model.g.forward(z, want ? &gc : nullptr);
            Tensor4 logits = model.d.forward_logits(fake, want ? &dc : nullptr);
            Tensor4 dlogits;
            const double l = bce_with_logits(logits, targets, dlogits);
            if (want) {
                Tensor4 dfake = model.d.backward(dc, dlogits);
                model.g.backward(gc, dfake);
            }
            return l;
        };
        track(grad_check(model.params(), loss, 1e-5, 250, 49));
    }
    std::ostringstream os;
    os << "max relative error " << worst;
    detail = os.str();
    return worst < 1e-5;
}

bool haar_identity(std::string& detail) {
    SplitMix64 seeds(50);
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = 2 * (1 + static_cast<int>(seeds.next_below(6)));
        const int w = 2 * (1 + static_cast<int>(seeds.next_below(6)));
        Tensor4 x(1, 2, h, w);
        SplitMix64 rng(seeds.next());
        for (double& v : x.v) v = 10.0 * normal_draw(rng);
        const Tensor4 pooled = haar_pool_forward(x);
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < pooled.h; ++y)
                for (int xx = 0; xx < pooled.w; ++xx) {
                    const double avg =
                        (x.at(0, c, 2 * y, 2 * xx) + x.at(0, c, 2 * y, 2 * xx + 1) +
                         x.at(0, c, 2 * y + 1, 2 * xx) + x.at(0, c, 2 * y + 1, 2 * xx + 1)) /
                        4.0;
                    if (pooled.at(0, c, y, xx) != 2.0 * avg) {
                        detail = "mismatch at trial " + std::to_string(trial);
                        return false;
                    }
                }
    }
    detail = "1000 tensors, bitwise";
    return true;
}

bool otsu_oracle(std::string& detail) {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SplitMix64 rng(6000 + seed);
        Raster r(40, 25);
        const double shift = rng.uniform(2.0, 10.0);
        const double p = rng.uniform(0.1, 0.9);
        for (size_t i = 0; i < r.size(); ++i)
            r[i] = normal_draw(rng) + (rng.next_double() < p ? shift : 0.0);
        const int bins = 32 + static_cast<int>(rng.next_below(225));

        // Brute force: recompute both class moments per candidate edge.
        const double lo = r.min(), hi = r.max();
        const double width = (hi - lo) / bins;
        std::vector<long> hist(bins, 0);
        for (size_t i = 0; i < r.size(); ++i) {
            int b = static_cast<int>((r[i] - lo) / width);
            b = std::clamp(b, 0, bins - 1);
            ++hist[b];
        }
        double best_var = -1.0;
        int best_edge = 0;
        for (int edge = 0; edge < bins - 1; ++edge) {
            double w0 = 0, w1 = 0, s0 = 0, s1 = 0;
            for (int b = 0; b <= edge; ++b) {
                w0 += hist[b];
                s0 += hist[b] * (b + 0.5);
            }
            for (int b = edge + 1; b < bins; ++b) {
                w1 += hist[b];
                s1 += hist[b] * (b + 0.5);
            }
            if (w0 == 0 || w1 == 0) continue;
            const double var = w0 * w1 * (s0 / w0 - s1 / w1) * (s0 / w0 - s1 / w1);
            if (var > best_var) {
                best_var = var;
                best_edge = edge;
            }
        }
        const double expect = lo + (best_edge + 1) * width;
        if (std::abs(otsu_threshold(r, bins) - expect) > 1e-12) {
            detail = "threshold mismatch at seed " + std::to_string(seed);
            return false;
        }
    }
    detail = "100 histograms";
    return true;
}

bool end_to_end_synthetic(std::string& detail) {
    const fs::path dir = fresh_dir("sarcd_accept_e2e");

    // Default desk-scale scene: 256x256, 4 looks, contrast 3, 1% changed.
    {
        std::ofstream spec(dir / "spec.txt");
        spec << "width = 256\nheight = 256\nchanged_fraction = 0.01\n"
             << "blob_radius_min = 3\nblob_radius_max = 8\nblob_count = 20\n"
             << "looks = 4\ncontrast = 3.0\nseed = 42\n";
    }
    if (run_cli("generate --spec " + (dir / "spec.txt").string() + " --out " + dir.string()) != 0) {
        detail = "generate failed";
        return false;
    }

    const std::string inputs = (dir / "i1.pgm").string() + " " + (dir / "i2.pgm").string();
    if (run_cli("detect " + inputs + " --seed 1 --out " + dir.string()) != 0) {
        detail = "detect failed";
        return false;
    }

    int maxval = 255;
    const Raster map_raw = load_pgm((dir / "changemap.pgm").string(), &maxval);
    Raster pred(map_raw.width(), map_raw.height());
    for (size_t p = 0; p < pred.size(); ++p) pred[p] = map_raw[p] > maxval / 2.0 ? 1.0 : 0.0;
    const Raster ref_raw = load_pgm((dir / "mask.pgm").string(), &maxval);
    Raster ref(ref_raw.width(), ref_raw.height());
    for (size_t p = 0; p < ref.size(); ++p) ref[p] = ref_raw[p] > maxval / 2.0 ? 1.0 : 0.0;

    const Metrics detect_m = metrics(confusion(pred, ref));

    // DI harness comparison: msrdi must beat lr on F1 under Otsu.
    auto di_f1 = [&](const std::string& method) -> double {
        const fs::path mdir = fresh_dir("sarcd_accept_di_" + method);
        if (run_cli("di " + inputs + " --method " + method + " --ref " +
                    (dir / "mask.pgm").string() + " --out " + mdir.string()) != 0)
            return -1.0;
        std::ifstream f(mdir / "di_report.json");
        const json report = json::parse(f);
        return report["metrics"]["f1"].get<double>();
    };
    const double f1_msrdi = di_f1("msrdi");
    const double f1_lr = di_f1("lr");

    std::ostringstream os;
    os << "PCC=" << detect_m.pcc * 100 << "% F1=" << detect_m.f1 << " | otsu F1: msrdi="
       << f1_msrdi << " lr=" << f1_lr;
    detail = os.str();
    return detect_m.pcc >= 0.99 && detect_m.f1 >= 0.70 && f1_msrdi > f1_lr && f1_lr >= 0.0;
}

bool determinism(std::string& detail) {
    const fs::path dir = fresh_dir("sarcd_accept_det");
    {
        std::ofstream spec(dir / "spec.txt");
        spec << "width = 96\nheight = 96\nchanged_fraction = 0.02\n"
             << "blob_radius_min = 4\nblob_radius_max = 7\n"
             << "looks = 4\ncontrast = 3.0\nseed = 7\n";
    }
    if (run_cli("generate --spec " + (dir / "spec.txt").string() + " --out " + dir.string()) != 0) {
        detail = "generate failed";
        return false;
    }
    {
        std::ofstream cfg(dir / "config.txt");
        cfg << "gan_epochs = 10\ngan_batches = 2\ncwnn_epochs = 4\nseed = 9\n";
    }

    const std::string inputs = (dir / "i1.pgm").string() + " " + (dir / "i2.pgm").string();
    const fs::path out1 = fresh_dir("sarcd_accept_det1");
    const fs::path out2 = fresh_dir("sarcd_accept_det2");
    for (const fs::path& out : {out1, out2})
        if (run_cli("detect " + inputs + " --config " + (dir / "config.txt").string() +
                    " --out " + out.string()) != 0) {
            detail = "detect failed";
            return false;
        }

    if (file_bytes(out1 / "changemap.pgm") != file_bytes(out2 / "changemap.pgm")) {
        detail = "changemap.pgm differs";
        return false;
    }
    json r1, r2;
    {
        std::ifstream f1(out1 / "report.json"), f2(out2 / "report.json");
        r1 = json::parse(f1);
        r2 = json::parse(f2);
    }
    r1.erase("timings");
    r2.erase("timings");
    if (r1 != r2) {
        detail = "report.json differs beyond timings";
        return false;
    }
    detail = "two runs byte-identical (timings excluded)";
    return true;
}

bool dcgan_smoke(std::string& detail) {
    // Real changed-class patches from a synthetic scene's true mask.
    SceneSpec spec;
    spec.width = 128;
    spec.height = 128;
    spec.changed_fraction = 0.03;
    spec.blob_count = 8;
    spec.blob_radius_min = 5.0;
    spec.blob_radius_max = 9.0;
    spec.seed = 77;
    const Scene scene = gen_scene(spec);
    const Raster i1 = speckle(scene.reflectivity1, spec.looks, 78);
    const Raster i2 = speckle(scene.reflectivity2, spec.looks, 79);
    const double lo = std::min(i1.min(), i2.min());
    const double hi = std::max(i1.max(), i2.max());
    auto to_unit = [&](const Raster& r) {
        Raster s(r.width(), r.height());
        for (size_t p = 0; p < r.size(); ++p) s[p] = 2.0 * (r[p] - lo) / (hi - lo) - 1.0;
        return s;
    };
    const Raster u1 = to_unit(i1), u2 = to_unit(i2);

    PatchSet real;
    real.patch_size = 28;
    real.cls = TernaryLabel::Changed;
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            if (scene.mask.at(y, x) > 0.0)
                real.push(extract_patch(u1, u2, y, x, 14), {y, x}, Provenance::Real);
    if (real.size() < 100) {
        detail = "too few real patches";
        return false;
    }

    // Discriminator pretraining monotonicity on fixed separable batches.
    {
        DcganModel model;
        model.g.init(80);
        model.d.init(81);
        Adam opt(6e-4);
        std::vector<size_t> idx(16);
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Tensor4 real_batch(16, 1, 28, 28);
        for (size_t i = 0; i < idx.size(); ++i)
            std::copy(real.patches[i].begin(), real.patches[i].end(),
                      real_batch.sample(static_cast<int>(i)));
        SplitMix64 rng(82);
        const Tensor4 fake_batch = model.g.forward(dcgan_noise(16, rng));
        const std::vector<double> tr(16, 1.0), tf(16, 0.0);
        double prev = 1e300;
        for (int step = 0; step < 10; ++step) {
            const double loss = dcgan_d_step(model, opt, real_batch, fake_batch, tr, tf);
            if (loss >= prev) {
                detail = "discriminator pretraining loss not decreasing at step " +
                         std::to_string(step);
                return false;
            }
            prev = loss;
        }
    }

    // Desk-scale adversarial training, then the mean-field comparison.
    DcganConfig cfg;
    cfg.epochs = 30;
    cfg.batches_per_epoch = 4;
    cfg.batch = 32;
    cfg.seed = 83;
    const DcganModel model = dcgan_train(real, cfg);
    const PatchSet gen = dcgan_sample(model, 256, 84);

    const size_t npx = 28 * 28;
    std::vector<double> real_mean(npx, 0.0), real_sd(npx, 0.0), gen_mean(npx, 0.0);
    for (const auto& p : real.patches)
        for (size_t i = 0; i < npx; ++i) real_mean[i] += p[i];
    for (double& v : real_mean) v /= static_cast<double>(real.size());
    for (const auto& p : real.patches)
        for (size_t i = 0; i < npx; ++i)
            real_sd[i] += (p[i] - real_mean[i]) * (p[i] - real_mean[i]);
    for (double& v : real_sd) v = std::sqrt(v / static_cast<double>(real.size()));
    for (const auto& p : gen.patches)
        for (size_t i = 0; i < npx; ++i) gen_mean[i] += p[i];
    for (double& v : gen_mean) v /= static_cast<double>(gen.size());

    size_t violations = 0;
    double worst = 0.0;
    for (size_t i = 0; i < npx; ++i) {
        const double dev = std::abs(gen_mean[i] - real_mean[i]);
        const double band = 3.0 * real_sd[i] + 1e-6;
        worst = std::max(worst, dev / band);
        if (dev > band) ++violations;
    }
    std::ostringstream os;
    os << violations << " pixels outside 3 sigma, worst ratio " << worst;
    detail = os.str();
    return violations == 0;
}

} // namespace

int main() {
    std::cout << "acceptance suite\n";
    run_criterion(1, "metric oracle (dataset D counts)", metric_oracle_table_d);
    run_criterion(2, "overall accuracy oracle (datasets A-C counts)", pcc_oracle_overall);
    run_criterion(3, "clustering invariants over 100 seeded runs", clustering_invariants);
    run_criterion(4, "imbalance robustness of the anchored clustering", imbalance_robustness);
    run_criterion(5, "gradient suite (layers and both networks)", gradient_suite);
    run_criterion(6, "haar pooling is exactly twice the 2x2 average pool", haar_identity);
    run_criterion(7, "otsu threshold equals the brute-force maximizer", otsu_oracle);
    run_criterion(8, "end-to-end synthetic detection quality", end_to_end_synthetic);
    run_criterion(9, "detect determinism (byte-identical reruns)", determinism);
    run_criterion(10, "dcgan smoke (pretraining descent and mean-field capture)", dcgan_smoke);

    if (failures == 0) {
        std::cout << "all criteria passed\n";
        return 0;
    }
    std::cout << failures << " criteria failed\n";
    return 1;
}
