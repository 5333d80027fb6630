// SPDX-License-Identifier: Apache-2.0

// Command-line workbench: synthetic scene generation, training, feed-forward
// inference, splat rendering, image metrics, gradient verification and
// Gaussian statistics.

#include "hgs/gradcheck_suite.hpp"
#include "hgs/io/ply.hpp"
#include "hgs/io/synth.hpp"
#include "hgs/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace hgs;

io::KvConfig merged_config(const std::string& config_path,
                           const std::vector<std::string>& overrides) {
    io::KvConfig cfg;
    if (!config_path.empty()) cfg = io::KvConfig::load(config_path);
    for (const auto& kv : overrides) cfg.set(kv);
    return cfg;
}

int cmd_synth(const std::string& kind, uint64_t seed, int64_t size, const std::string& out) {
    io::synth_scene(out, io::synth_kind_from_string(kind), seed, size);
    std::printf("wrote %s scene (seed %llu, %lldx%lld) to %s\n", kind.c_str(),
                (unsigned long long)seed, (long long)size, (long long)size, out.c_str());
    return 0;
}

int cmd_train(const std::string& scene, const std::string& out, const std::string& log_path,
              const io::KvConfig& cfg) {
    TrainConfig tc = TrainConfig::from_config(cfg);
    ModelConfig mc = ModelConfig::from_config(cfg);
    mc.eta = tc.eta;
    Model<float> model(uint64_t(cfg.get_int("seed", 0)), mc);
    std::printf("model: %lld parameters\n", (long long)model.params.total_parameters());
    auto provider = load_scene_provider(scene);
    std::printf("dataset: %zu scene(s) from %s\n", provider->scene_count(), scene.c_str());
    auto result = train(model, *provider, tc, out, log_path);
    std::printf("trained %lld steps; final loss %.6f (stages %.6f / %.6f / %.6f)\n",
                (long long)result.steps, result.final_loss, result.final_stage_loss[0],
                result.final_stage_loss[1], result.final_stage_loss[2]);
    std::printf("checkpoint: %s\nlog: %s\n", out.c_str(), log_path.c_str());
    return 0;
}

Model<float> load_model(const std::string& checkpoint, const io::KvConfig& cfg) {
    ModelConfig mc = ModelConfig::from_config(cfg);
    Model<float> model(0, mc);
    model.load(checkpoint);
    return model;
}

int cmd_infer(const std::string& scene_dir, const std::string& checkpoint, int stage,
              const std::string& out_dir, const std::string& ply_path, double ply_threshold,
              const io::KvConfig& cfg) {
    Model<float> model = load_model(checkpoint, cfg);
    auto scene = io::load_scene(scene_dir);
    auto sample = sample_from_scene(scene);
    RunOptions opt;
    opt.near = cfg.get_double("near", 0);
    opt.far = cfg.get_double("far", 0);
    auto result = infer(model, sample, stage, opt);

    std::filesystem::create_directories(out_dir);
    double psnr_acc = 0, ssim_acc = 0;
    for (size_t i = 0; i < result.target_renders.size(); ++i) {
        auto png = std::filesystem::path(out_dir) / cat("target_", i, ".png");
        auto raw = std::filesystem::path(out_dir) / cat("target_", i, ".rawf");
        io::write_png(png, result.target_renders[i]);
        io::write_rawf(raw, result.target_renders[i]);
        double p = psnr(result.target_renders[i], sample.targets[i].image);
        double s = ssim(result.target_renders[i], sample.targets[i].image);
        psnr_acc += p;
        ssim_acc += s;
        std::printf("target %zu: PSNR %.2f dB  SSIM %.4f  -> %s\n", i, p, s,
                    png.string().c_str());
    }
    std::printf("stage %d fused set: %lld primitives; forward %.3f s\n", stage,
                (long long)result.fused.size(), result.seconds);
    std::printf("mean PSNR %.2f dB  mean SSIM %.4f\n",
                psnr_acc / double(result.target_renders.size()),
                ssim_acc / double(result.target_renders.size()));
    if (!ply_path.empty()) {
        io::export_ply(result.fused, ply_path, ply_threshold);
        std::printf("exported %s\n", ply_path.c_str());
    }
    return 0;
}

int cmd_render(const std::string& ply_path, const std::string& scene_dir,
               const std::string& out_dir) {
    auto block = io::import_ply(ply_path);
    GaussianSet<float> set;
    set.stages.push_back(block);
    auto scene = io::load_scene(scene_dir);
    std::filesystem::create_directories(out_dir);
    size_t idx = 0;
    for (const auto* tv : scene.targets()) {
        auto out = render(set, tv->intrinsics, tv->pose);
        auto path = std::filesystem::path(out_dir) / cat("render_", idx, ".png");
        io::write_png(path, out.color);
        std::printf("rendered %lld primitives -> %s\n", (long long)set.size(),
                    path.string().c_str());
        ++idx;
    }
    return 0;
}

Tensor<float> load_image_any(const std::filesystem::path& p) {
    if (p.extension() == ".rawf") return io::read_rawf<float>(p);
    return io::read_png<float>(p);
}

int cmd_eval(const std::string& render_path, const std::string& gt_path) {
    namespace fs = std::filesystem;
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (fs::is_directory(render_path)) {
        check(fs::is_directory(gt_path), "eval: --gt must be a directory when --render is");
        for (const auto& e : fs::directory_iterator(render_path)) {
            if (e.path().extension() != ".png" && e.path().extension() != ".rawf") continue;
            fs::path gt = fs::path(gt_path) / e.path().filename();
            check(fs::exists(gt), "eval: missing ground truth ", gt.string());
            pairs.emplace_back(e.path(), gt);
        }
        std::sort(pairs.begin(), pairs.end());
        check(!pairs.empty(), "eval: no images in ", render_path);
    } else {
        pairs.emplace_back(render_path, gt_path);
    }
    double pa = 0, sa = 0;
    for (const auto& [rp, gp] : pairs) {
        auto a = load_image_any(rp);
        auto b = load_image_any(gp);
        double p = psnr(a, b), s = ssim(a, b);
        pa += p;
        sa += s;
        std::printf("%s: PSNR %.2f dB  SSIM %.4f\n", rp.filename().string().c_str(), p, s);
    }
    if (pairs.size() > 1)
        std::printf("mean: PSNR %.2f dB  SSIM %.4f\n", pa / double(pairs.size()),
                    sa / double(pairs.size()));
    return 0;
}

int cmd_gradcheck(bool skip_pipeline) {
    auto t0 = std::chrono::steady_clock::now();
    auto entries = run_gradient_suite(!skip_pipeline);
    bool all_pass = true;
    for (const auto& e : entries) {
        std::printf("%-28s max_rel %.3e  (tol %.0e)  %s\n", e.name.c_str(), e.max_rel,
                    e.tolerance, e.pass ? "PASS" : "FAIL");
        all_pass = all_pass && e.pass;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%zu checks in %.1f s: %s\n", entries.size(), secs,
                all_pass ? "ALL PASS" : "FAILURES PRESENT");
    return all_pass ? 0 : 2;
}

int cmd_stats(const std::string& scene_dir, const std::string& checkpoint, int stage,
              const io::KvConfig& cfg) {
    Model<float> model = load_model(checkpoint, cfg);
    auto scene = io::load_scene(scene_dir);
    auto sample = sample_from_scene(scene);
    auto result = infer(model, sample, stage, {});
    auto stats = gaussian_statistics(result.fused);
    std::printf("%-7s %10s %14s %16s %12s %14s\n", "stage", "count", "mean_opacity",
                "median_opacity", "mean_scale", "median_scale");
    for (const auto& s : stats)
        std::printf("%-7d %10lld %14.4f %16.4f %12.5f %14.5f\n", s.stage, (long long)s.count,
                    s.mean_opacity, s.median_opacity, s.mean_scale, s.median_scale);
    if (stats.size() >= 2) {
        std::printf("count ratio:");
        for (const auto& s : stats)
            std::printf(" %g", double(s.count) / double(stats[0].count));
        std::printf("\n");
        const auto& first = stats.front();
        const auto& last = stats.back();
        std::printf("median scale stage %d vs stage %d: %.5f vs %.5f (ratio %.2fx)\n",
                    first.stage, last.stage, first.median_scale, last.median_scale,
                    first.median_scale / std::max(last.median_scale, 1e-12));
        std::printf("opacity trend: stage %d mean %.4f %s stage %d mean %.4f\n", first.stage,
                    first.mean_opacity, first.mean_opacity > last.mean_opacity ? ">" : "<=",
                    last.stage, last.mean_opacity);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical coarse-to-fine gaussian splatting workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "flat key = value config file")->expected(1);
    app.add_option("--set", overrides, "override a config key (key=value), repeatable");

    auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
    std::string synth_kind = "textured-cube", synth_out;
    uint64_t synth_seed = 1;
    int64_t synth_size = 64;
    synth->add_option("--kind", synth_kind, "textured-plane | textured-cube | two-plane");
    synth->add_option("--seed", synth_seed, "texture/geometry seed");
    synth->add_option("--size", synth_size, "image extent (multiple of 8)");
    synth->add_option("--out", synth_out, "output scene directory")->required();

    auto* train_cmd = app.add_subcommand("train", "optimize a model on scenes");
    std::string train_scene, train_out = "model.hsp", train_log = "train_log.csv";
    train_cmd->add_option("--scene", train_scene, "scene directory (or directory of scenes)")
        ->required();
    train_cmd->add_option("--out", train_out, "checkpoint path");
    train_cmd->add_option("--log", train_log, "CSV training log path");

    auto* infer_cmd = app.add_subcommand("infer", "feed-forward inference on a scene");
    std::string infer_scene, infer_ckpt, infer_out = "renders", infer_ply;
    int infer_stage = 3;
    double infer_ply_threshold = 0.0;
    infer_cmd->add_option("--scene", infer_scene)->required();
    infer_cmd->add_option("--checkpoint", infer_ckpt)->required();
    infer_cmd->add_option("--stage", infer_stage, "terminate after stage 1|2|3")
        ->check(CLI::Range(1, 3));
    infer_cmd->add_option("--out", infer_out, "output directory for renders");
    infer_cmd->add_option("--ply", infer_ply, "also export the fused set as PLY");
    infer_cmd->add_option("--ply-threshold", infer_ply_threshold,
                          "drop primitives below this opacity on export");

    auto* render_cmd = app.add_subcommand("render", "render an exported PLY at scene cameras");
    std::string render_ply, render_scene, render_out = "renders";
    render_cmd->add_option("--ply", render_ply)->required();
    render_cmd->add_option("--scene", render_scene)->required();
    render_cmd->add_option("--out", render_out);

    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM between renders and ground truth");
    std::string eval_render, eval_gt;
    eval_cmd->add_option("--render", eval_render)->required();
    eval_cmd->add_option("--gt", eval_gt)->required();

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    bool grad_quick = false;
    grad_cmd->add_flag("--quick", grad_quick, "skip the end-to-end pipeline check");

    auto* stats_cmd = app.add_subcommand("stats", "per-stage Gaussian statistics report");
    std::string stats_scene, stats_ckpt;
    int stats_stage = 3;
    stats_cmd->add_option("--scene", stats_scene)->required();
    stats_cmd->add_option("--checkpoint", stats_ckpt)->required();
    stats_cmd->add_option("--stage", stats_stage)->check(CLI::Range(1, 3));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        io::KvConfig cfg = merged_config(config_path, overrides);
        if (synth->parsed()) return cmd_synth(synth_kind, synth_seed, synth_size, synth_out);
        if (train_cmd->parsed()) return cmd_train(train_scene, train_out, train_log, cfg);
        if (infer_cmd->parsed())
            return cmd_infer(infer_scene, infer_ckpt, infer_stage, infer_out, infer_ply,
                             infer_ply_threshold, cfg);
        if (render_cmd->parsed()) return cmd_render(render_ply, render_scene, render_out);
        if (eval_cmd->parsed()) return cmd_eval(eval_render, eval_gt);
        if (grad_cmd->parsed()) return cmd_gradcheck(grad_quick);
        if (stats_cmd->parsed()) return cmd_stats(stats_scene, stats_ckpt, stats_stage, cfg);
    } catch (const hgs::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
