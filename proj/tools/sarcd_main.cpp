// Copyright 2026 The sarcd Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: scene generation, change detection, the DI
// harness, metric evaluation and gradient verification.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sarcd/config.hpp"
#include "sarcd/eval.hpp"
#include "sarcd/nets.hpp"
#include "sarcd/pgm.hpp"
#include "sarcd/pipeline.hpp"
#include "sarcd/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;      // bad arguments, unreadable/invalid files
constexpr int kExitDegenerate = 3; // pipeline cannot proceed on this input

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw sarcd::IoError("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

sarcd::Raster load_binary_map(const std::string& path) {
    int maxval = 255;
    const sarcd::Raster r = sarcd::load_pgm(path, &maxval);
    sarcd::Raster out(r.width(), r.height());
    const double threshold = maxval / 2.0;
    for (size_t i = 0; i < r.size(); ++i) out[i] = r[i] > threshold ? 1.0 : 0.0;
    return out;
}

void print_metrics(const sarcd::Metrics& m) {
    std::cout << sarcd::metrics_to_json(m).dump(2) << "\n";
}

int cmd_generate(const std::string& spec_file, const std::string& out_dir, long seed_override) {
    sarcd::SceneSpec spec;
    if (!spec_file.empty()) spec = sarcd::scene_spec_from_file(spec_file);
    if (seed_override >= 0) spec.seed = static_cast<uint64_t>(seed_override);
    spec.validate();

    const sarcd::Scene scene = sarcd::gen_scene(spec);
    const sarcd::Raster int1 =
        sarcd::speckle(scene.reflectivity1, spec.looks, sarcd::derive_seed(spec.seed, 0x7431ull));
    const sarcd::Raster int2 =
        sarcd::speckle(scene.reflectivity2, spec.looks, sarcd::derive_seed(spec.seed, 0x7432ull));

    fs::create_directories(out_dir);
    const auto s1 = sarcd::save_pgm_rescaled(int1, (fs::path(out_dir) / "i1.pgm").string());
    const auto s2 = sarcd::save_pgm_rescaled(int2, (fs::path(out_dir) / "i2.pgm").string());
    sarcd::Raster mask_img(scene.mask.width(), scene.mask.height());
    for (size_t p = 0; p < mask_img.size(); ++p) mask_img[p] = scene.mask[p] > 0.0 ? 255.0 : 0.0;
    sarcd::save_pgm(mask_img, (fs::path(out_dir) / "mask.pgm").string(), 255);

    long mask_count = 0;
    for (size_t p = 0; p < scene.mask.size(); ++p) mask_count += scene.mask[p] > 0.0 ? 1 : 0;
    json sidecar{{"spec", sarcd::scene_spec_to_json(spec)},
                 {"mask_pixels", mask_count},
                 {"scaling",
                  {{"i1", {{"offset", s1.first}, {"scale", s1.second}}},
                   {"i2", {{"offset", s2.first}, {"scale", s2.second}}}}}};
    write_json(sidecar, fs::path(out_dir) / "scene.json");
    std::cout << "scene written to " << out_dir << " (" << mask_count << " changed pixels)\n";
    return kExitOk;
}

int cmd_detect(const std::string& i1_path, const std::string& i2_path,
               const std::string& config_file, const std::string& out_dir, long seed_override,
               bool skip_gan) {
    sarcd::PipelineConfig cfg;
    if (!config_file.empty()) cfg.load(config_file);
    if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
    if (skip_gan) cfg.skip_gan = true;

    const auto t0 = std::chrono::steady_clock::now();
    const sarcd::Raster i1 = sarcd::load_pgm(i1_path);
    const sarcd::Raster i2 = sarcd::load_pgm(i2_path);

    sarcd::DetectArtifacts art = sarcd::run_detect(i1, i2, cfg);
    const double detect_seconds = seconds_since(t0);

    fs::create_directories(out_dir);
    const auto msrdi_scale =
        sarcd::save_pgm_rescaled(art.msrdi_image, (fs::path(out_dir) / "msrdi.pgm").string());
    sarcd::save_pgm(sarcd::ternary_to_raster(art.ternary),
                    (fs::path(out_dir) / "ternary.pgm").string(), 255);
    sarcd::Raster map255(art.change_map.width(), art.change_map.height());
    for (size_t p = 0; p < map255.size(); ++p) map255[p] = art.change_map[p] > 0.5 ? 255.0 : 0.0;
    sarcd::save_pgm(map255, (fs::path(out_dir) / "changemap.pgm").string(), 255);

    {
        std::ofstream csv(fs::path(out_dir) / "cwnn_trace.csv");
        csv << "epoch,loss\n";
        for (size_t e = 0; e < art.cwnn_loss_trace.size(); ++e)
            csv << e << "," << art.cwnn_loss_trace[e] << "\n";
    }
    {
        std::ofstream csv(fs::path(out_dir) / "gan_trace.csv");
        csv << "epoch,d_loss,g_loss,objective\n";
        for (const auto& row : art.gan_trace)
            csv << row.epoch << "," << row.d_loss << "," << row.g_loss << "," << row.objective
                << "\n";
    }

    json report = art.report;
    report["inputs"] = {{"i1", i1_path}, {"i2", i2_path}};
    report["msrdi_scaling"] = {{"offset", msrdi_scale.first}, {"scale", msrdi_scale.second}};
    report["timings"] = {{"detect_seconds", detect_seconds}};
    write_json(report, fs::path(out_dir) / "report.json");

    std::cout << "detect: N1=" << art.n1 << " N2=" << art.n2 << " Nh=" << art.nh
              << " n_t=" << art.n_t << (art.gan_used ? "" : " (gan skipped)") << " in "
              << detect_seconds << " s\n";
    return kExitOk;
}

int cmd_di(const std::string& i1_path, const std::string& i2_path, const std::string& method_str,
           const std::string& config_file, const std::string& out_dir,
           const std::string& ref_path) {
    sarcd::PipelineConfig cfg;
    if (!config_file.empty()) cfg.load(config_file);
    const sarcd::DiMethod method = sarcd::di_method_from_string(method_str);

    const sarcd::Raster i1 = sarcd::load_pgm(i1_path);
    const sarcd::Raster i2 = sarcd::load_pgm(i2_path);
    const sarcd::DiArtifacts art = sarcd::run_di(i1, i2, cfg, method);

    fs::create_directories(out_dir);
    const auto di_scale =
        sarcd::save_pgm_rescaled(art.di, (fs::path(out_dir) / "di.pgm").string());
    sarcd::Raster map255(art.binary.width(), art.binary.height());
    for (size_t p = 0; p < map255.size(); ++p) map255[p] = art.binary[p] > 0.5 ? 255.0 : 0.0;
    sarcd::save_pgm(map255, (fs::path(out_dir) / "otsu_map.pgm").string(), 255);

    json report{{"method", method_str},
                {"threshold", art.threshold},
                {"di_scaling", {{"offset", di_scale.first}, {"scale", di_scale.second}}}};
    if (!ref_path.empty()) {
        const sarcd::Raster ref = load_binary_map(ref_path);
        const sarcd::Metrics m = sarcd::metrics(sarcd::confusion(art.binary, ref));
        report["metrics"] = sarcd::metrics_to_json(m);
        print_metrics(m);
    }
    write_json(report, fs::path(out_dir) / "di_report.json");
    return kExitOk;
}

int cmd_eval(const std::string& map_path, const std::string& ref_path, const std::string& counts,
             const std::string& out_file) {
    sarcd::Metrics m;
    if (!counts.empty()) {
        const auto parts = sarcd::detail::split(counts, ',');
        if (parts.size() != 4)
            throw std::invalid_argument("--counts expects tp,fp,fn,tn");
        sarcd::ConfusionCounts c;
        c.tp = sarcd::detail::parse_long("tp", parts[0]);
        c.fp = sarcd::detail::parse_long("fp", parts[1]);
        c.fn = sarcd::detail::parse_long("fn", parts[2]);
        c.tn = sarcd::detail::parse_long("tn", parts[3]);
        m = sarcd::metrics(c);
    } else {
        if (map_path.empty() || ref_path.empty())
            throw std::invalid_argument("eval needs a change map and a reference, or --counts");
        const sarcd::Raster pred = load_binary_map(map_path);
        const sarcd::Raster ref = load_binary_map(ref_path);
        m = sarcd::metrics(sarcd::confusion(pred, ref));
    }
    print_metrics(m);
    if (!out_file.empty()) write_json(sarcd::metrics_to_json(m), out_file);
    return kExitOk;
}

int cmd_gradcheck(double tol, int max_per_tensor, bool exhaustive) {
    const size_t cap = exhaustive ? 0 : static_cast<size_t>(max_per_tensor);
    bool all_pass = true;

    auto report_net = [&](const std::string& name, const sarcd::GradCheckReport& rep) {
        for (const auto& e : rep.entries)
            std::cout << name << " " << e.tensor << ": max_rel_err=" << e.max_rel_err << " ("
                      << e.checked << "/" << e.total << " checked)\n";
        std::cout << name << " overall: " << rep.max_rel_err
                  << (rep.pass(tol) ? " PASS" : " FAIL") << "\n";
        all_pass = all_pass && rep.pass(tol);
    };

    {
        sarcd::CwnnModel model(28);
        model.init(7);
        sarcd::SplitMix64 rng(11);
        sarcd::Tensor4 x(2, 1, 28, 28);
        for (double& v : x.v) v = 0.5 * sarcd::normal_draw(rng);
        const std::vector<int> labels{0, 1};
        auto loss = [&](bool want_grad) {
            sarcd::CwnnModel::Cache cache;
            sarcd::Tensor4 logits = model.forward_logits(x, want_grad ? &cache : nullptr);
            sarcd::Tensor4 dlogits;
            const double l = sarcd::softmax_cross_entropy(logits, labels, dlogits);
            if (want_grad) model.backward(cache, dlogits);
            return l;
        };
        report_net("cwnn", sarcd::grad_check(model.params(), loss, 1e-5, cap, 5));
    }
    {
        sarcd::DcganModel model;
        model.g.init(3);
        model.d.init(4);
        sarcd::SplitMix64 rng(12);
        sarcd::Tensor4 z = sarcd::dcgan_noise(2, rng);
        const std::vector<double> targets{0.9, 0.1};
        auto loss = [&](bool want_grad) {
            sarcd::DcganGenerator::Cache gc;
            sarcd::DcganDiscriminator::Cache dc;
            sarcd::Tensor4 fake = model.g.forward(z, want_grad ? &gc : nullptr);
            sarcd::Tensor4 logits = model.d.forward_logits(fake, want_grad ? &dc : nullptr);
            sarcd::Tensor4 dlogits;
            const double l = sarcd::bce_with_logits(logits, targets, dlogits);
            if (want_grad) {
                sarcd::Tensor4 dfake = model.d.backward(dc, dlogits);
                model.g.backward(gc, dfake);
            }
            return l;
        };
        report_net("dcgan", sarcd::grad_check(model.params(), loss, 1e-5, cap, 6));
    }
    return all_pass ? kExitOk : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised change detection for bi-temporal speckled intensity images"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Write a synthetic speckled scene triplet");
    std::string gen_spec, gen_out = ".";
    long gen_seed = -1;
    gen->add_option("--spec", gen_spec, "Scene spec file (key=value)");
    gen->add_option("--out", gen_out, "Output directory");
    gen->add_option("--seed", gen_seed, "Seed override");

    // detect
    auto* det = app.add_subcommand("detect", "Run the full change-detection pipeline");
    std::string det_i1, det_i2, det_cfg, det_out = ".";
    long det_seed = -1;
    bool det_skip_gan = false;
    det->add_option("i1", det_i1, "First-date PGM")->required();
    det->add_option("i2", det_i2, "Second-date PGM")->required();
    det->add_option("--config", det_cfg, "Config file (key=value)");
    det->add_option("--out", det_out, "Output directory");
    det->add_option("--seed", det_seed, "Seed override");
    det->add_flag("--skip-gan", det_skip_gan, "Skip minority-class augmentation");

    // di
    auto* di = app.add_subcommand("di", "Difference-image harness with Otsu binarization");
    std::string di_i1, di_i2, di_method, di_cfg, di_out = ".", di_ref;
    di->add_option("i1", di_i1, "First-date PGM")->required();
    di->add_option("i2", di_i2, "Second-date PGM")->required();
    di->add_option("--method", di_method, "lr, slr or msrdi")->required();
    di->add_option("--config", di_cfg, "Config file (key=value)");
    di->add_option("--out", di_out, "Output directory");
    di->add_option("--ref", di_ref, "Reference mask for metrics");

    // eval
    auto* ev = app.add_subcommand("eval", "Accuracy metrics for a change map");
    std::string ev_map, ev_ref, ev_counts, ev_out;
    ev->add_option("changemap", ev_map, "Predicted map PGM");
    ev->add_option("reference", ev_ref, "Reference map PGM");
    ev->add_option("--counts", ev_counts, "Direct counts mode: tp,fp,fn,tn");
    ev->add_option("--out", ev_out, "Write metrics JSON here");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    double gc_tol = 1e-5;
    int gc_max = 256;
    bool gc_exhaustive = false;
    gc->add_option("--tol", gc_tol, "Maximum relative error");
    gc->add_option("--max-per-tensor", gc_max, "Sampled checks per tensor");
    gc->add_flag("--exhaustive", gc_exhaustive, "Check every parameter");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_spec, gen_out, gen_seed);
        if (det->parsed())
            return cmd_detect(det_i1, det_i2, det_cfg, det_out, det_seed, det_skip_gan);
        if (di->parsed()) return cmd_di(di_i1, di_i2, di_method, di_cfg, di_out, di_ref);
        if (ev->parsed()) return cmd_eval(ev_map, ev_ref, ev_counts, ev_out);
        if (gc->parsed()) return cmd_gradcheck(gc_tol, gc_max, gc_exhaustive);
    } catch (const sarcd::EmptyMinorityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const sarcd::DegenerateInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const sarcd::GenerationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
