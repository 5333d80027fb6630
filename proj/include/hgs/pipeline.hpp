// SPDX-License-Identifier: Apache-2.0
#pragma once

// End-to-end orchestration: the three coarse-to-fine stages, the per-stage
// photometric objective, the training loop, feed-forward inference, and the
// per-stage Gaussian statistics report.

#include "hgs/backbone.hpp"
#include "hgs/checkpoint.hpp"
#include "hgs/cost_volume.hpp"
#include "hgs/error_aware.hpp"
#include "hgs/fusion.hpp"
#include "hgs/io/config.hpp"
#include "hgs/io/image.hpp"
#include "hgs/io/scene.hpp"
#include "hgs/metrics.hpp"
#include "hgs/renderer.hpp"

#include <chrono>

namespace hgs {

struct ModelConfig {
    BackboneConfig backbone;       // stage-1 channels C=128, 4 heads, 2 pairs
    CostVolumeConfig costvol;      // R=32 candidates, C_GS=32
    GaussianHeadConfig head;       // sh_degree 1
    EamConfig eam;
    MfmConfig mfm;
    double eta = 0.1;
    std::string aux = "zero";      // "zero" | "patch"
    int64_t patch_aux_channels = 16;

    static ModelConfig from_config(const io::KvConfig& kv) {
        ModelConfig c;
        c.costvol.candidate_count = int(kv.get_int("candidates", c.costvol.candidate_count));
        c.head.sh_degree = int(kv.get_int("sh_degree", c.head.sh_degree));
        c.eta = kv.get_double("eta", c.eta);
        c.aux = kv.get_string("aux", c.aux);
        check(c.aux == "zero" || c.aux == "patch", "config: aux must be zero or patch, got ",
              c.aux);
        check(c.eta >= 0.0 && c.eta <= 1.0, "config: eta must be in [0,1], got ", c.eta);
        return c;
    }

    std::map<std::string, std::string> metadata() const {
        return {{"stage1_channels", std::to_string(backbone.stage1_channels)},
                {"heads", std::to_string(backbone.heads)},
                {"transformer_pairs", std::to_string(backbone.transformer_pairs)},
                {"candidates", std::to_string(costvol.candidate_count)},
                {"gs_channels", std::to_string(costvol.gs_channels)},
                {"sh_degree", std::to_string(head.sh_degree)},
                {"aux", aux}};
    }
};

template <class T>
class Model {
public:
    ModelConfig cfg;
    ParamRegistry<T> params;
    BackboneParams<T> backbone;
    CostVolumeParams<T> costvol;
    std::vector<GaussianHeadParams<T>> heads; // one per stage
    EamParams<T> eam2, eam3;
    MfmParams<T> mfm21, mfm31, mfm32;
    std::unique_ptr<AuxFeatureProvider<T>> aux;

    Model(uint64_t seed, ModelConfig config) : cfg(std::move(config)), params(seed) {
        cfg.head.gs_channels = cfg.costvol.gs_channels;
        cfg.eam.gs_channels = cfg.costvol.gs_channels;
        int64_t aux_ch = cfg.aux == "patch" ? cfg.patch_aux_channels : 0;
        backbone = BackboneParams<T>(params, cfg.backbone, aux_ch);
        costvol = CostVolumeParams<T>(params, cfg.costvol, cfg.backbone.stage1_channels);
        for (int s = 1; s <= 3; ++s)
            heads.emplace_back(params, cat("head", s), cfg.head);
        eam2 = EamParams<T>(params, "eam2", cfg.eam, cfg.backbone.stage1_channels / 2);
        eam3 = EamParams<T>(params, "eam3", cfg.eam, cfg.backbone.stage1_channels / 4);
        int64_t cat_ch = 2 * cfg.costvol.gs_channels;
        mfm21 = MfmParams<T>(params, "mfm21", cfg.mfm, cat_ch);
        mfm31 = MfmParams<T>(params, "mfm31", cfg.mfm, cat_ch);
        mfm32 = MfmParams<T>(params, "mfm32", cfg.mfm, cat_ch);
        if (cfg.aux == "patch")
            aux = std::make_unique<PatchProjectionAux<T>>(cfg.patch_aux_channels);
        else
            aux = std::make_unique<ZeroAuxProvider<T>>();
    }

    void save(const std::filesystem::path& path) const {
        save_checkpoint(path, params, cfg.metadata());
    }

    void load(const std::filesystem::path& path) {
        auto meta = load_checkpoint(path, params);
        for (const auto& [k, v] : cfg.metadata()) {
            auto it = meta.find(k);
            check(it != meta.end() && it->second == v, "checkpoint: metadata '", k,
                  "' is ", it == meta.end() ? std::string("missing") : it->second,
                  " but the model expects ", v, "; checkpoint/config mismatch");
        }
    }
};

/// Per-stage bundle produced by one pass through the hierarchy.
template <class T>
struct StageState {
    int stage = 0;
    Tensor<T> features;      // F_i
    Tensor<T> depth;         // D_i [N,h,w]
    Tensor<T> gs_features;   // F_i^GS
    Tensor<T> offset_degree; // alpha_i (stages 2,3)
    Tensor<T> input_renders; // [N,H,W,3] renders of the fused set at input views
    GaussianSet<T> fused;    // union of stages 1..i with modulated opacities
};

struct RunOptions {
    int up_to_stage = 3;
    double near = 0, far = 0;
    std::array<double, 3> background{0, 0, 0};
    RenderConfig render;
};

namespace detail {

template <class T>
Tensor<T> stack_views(const std::vector<CameraView<T>>& views) {
    std::vector<Tensor<T>> parts;
    for (const auto& v : views) {
        const auto& s = v.image.shape();
        parts.push_back(reshape(v.image, {1, s[0], s[1], s[2]}));
    }
    return concat(parts, 0);
}

template <class T>
Tensor<T> render_input_views(const GaussianSet<T>& fused, const std::vector<CameraView<T>>& views,
                             const RunOptions& opt) {
    std::vector<Tensor<T>> parts;
    for (const auto& v : views) {
        auto out = render(fused, v.intrinsics, v.pose, opt.background, opt.render);
        parts.push_back(reshape(out.color, {1, v.intrinsics.height, v.intrinsics.width, 3}));
    }
    return concat(parts, 0);
}

} // namespace detail

/// Runs stages 1..opt.up_to_stage. Input-view renders (needed by the next
/// stage's error maps) are produced only while a later stage will consume
/// them, which is what makes early termination cheaper.
template <class T>
std::vector<StageState<T>> run_stages(const std::vector<CameraView<T>>& inputs, Model<T>& model,
                                      const RunOptions& opt) {
    const int64_t n = int64_t(inputs.size());
    check(n >= 2, "run_stages: needs at least 2 posed input views, got ", n);
    check(opt.up_to_stage >= 1 && opt.up_to_stage <= 3, "run_stages: stage must be 1..3");
    check(opt.near > 0 && opt.near < opt.far, "run_stages: invalid near/far bounds");
    for (const auto& v : inputs) v.validate();
    const int64_t full_h = inputs[0].intrinsics.height, full_w = inputs[0].intrinsics.width;

    Tensor<T> images = detail::stack_views(inputs);
    FeaturePyramid<T> pyr = extract_pyramid(images, model.backbone, *model.aux);

    std::vector<Pose> poses;
    for (const auto& v : inputs) poses.push_back(v.pose);
    auto stage_intrinsics = [&](int stage) {
        std::vector<Intrinsics> out;
        for (const auto& v : inputs)
            out.push_back(v.intrinsics.scaled_to(full_w >> (3 - stage), full_h >> (3 - stage)));
        return out;
    };

    std::vector<StageState<T>> states;

    // Stage 1: plane-sweep cost volume.
    {
        StageState<T> st;
        st.stage = 1;
        st.features = pyr.f1;
        auto intr1 = stage_intrinsics(1);
        DepthCandidates cands =
            sample_depth_candidates(opt.near, opt.far, model.cfg.costvol.candidate_count);
        Tensor<T> cv = build_cost_volume(pyr.f1, intr1, poses, cands);
        auto est = estimate_depth_stage1(cv, pyr.f1, model.costvol, cands);
        st.depth = est.depth;
        st.gs_features = est.gs_features;
        StageGaussians<T> s1 =
            predict_gaussians(st.gs_features, st.depth, intr1, poses, model.heads[0], 1);
        st.fused = fuse<T>({s1}, {});
        if (opt.up_to_stage > 1)
            st.input_renders = detail::render_input_views(st.fused, inputs, opt);
        states.push_back(std::move(st));
    }

    for (int stage = 2; stage <= opt.up_to_stage; ++stage) {
        StageState<T> st;
        st.stage = stage;
        st.features = pyr.stage(stage);
        const StageState<T>& prev = states.back();
        int64_t h = full_h >> (3 - stage), w = full_w >> (3 - stage);

        Tensor<T> err = compute_error_map(prev.input_renders, images, h, w);
        auto pred = predict_offsets(err, st.features,
                                    stage == 2 ? model.eam2 : model.eam3);
        st.offset_degree = pred.alpha;
        st.gs_features = pred.gs_features;
        st.depth = refine_depth(pred.alpha, prev.depth, model.cfg.eta);

        auto intr_s = stage_intrinsics(stage);
        StageGaussians<T> current = predict_gaussians(st.gs_features, st.depth, intr_s, poses,
                                                      model.heads[size_t(stage - 1)], stage);

        // Modulation of every earlier stage against its own render errors.
        std::vector<StageGaussians<T>> blocks = prev.fused.stages;
        blocks.push_back(current);
        std::vector<Tensor<T>> xi;
        for (int k = 1; k < stage; ++k) {
            const StageState<T>& earlier = states[size_t(k - 1)];
            int64_t hk = full_h >> (3 - k), wk = full_w >> (3 - k);
            Tensor<T> fcat = concat_features(st.gs_features, earlier.gs_features);
            Tensor<T> err_k = compute_error_map(earlier.input_renders, images, hk, wk);
            const MfmParams<T>& mfm = stage == 2 ? model.mfm21
                                     : (k == 1 ? model.mfm31 : model.mfm32);
            xi.push_back(modulation_coefficients(fcat, err_k, mfm));
        }
        st.fused = fuse(std::move(blocks), xi);
        if (stage < opt.up_to_stage)
            st.input_renders = detail::render_input_views(st.fused, inputs, opt);
        states.push_back(std::move(st));
    }
    return states;
}

/// Pluggable perceptual objective (the paper's learned metric is external;
/// this interface keeps the lambda_lpips term exercisable).
template <class T>
class PerceptualLoss {
public:
    virtual ~PerceptualLoss() = default;
    virtual Tensor<T> compare(const Tensor<T>& render, const Tensor<T>& target) const = 0;
};

/// Multi-scale image-gradient difference stand-in (no pretrained weights).
template <class T>
class GradientDifferencePerceptual final : public PerceptualLoss<T> {
public:
    Tensor<T> compare(const Tensor<T>& render, const Tensor<T>& target) const override {
        auto term = [](const Tensor<T>& img) {
            const auto& s = img.shape();
            Tensor<T> gx = sub(slice(img, 1, 1, s[1]), slice(img, 1, 0, s[1] - 1));
            Tensor<T> gy = sub(slice(img, 0, 1, s[0]), slice(img, 0, 0, s[0] - 1));
            return std::pair<Tensor<T>, Tensor<T>>{gx, gy};
        };
        Tensor<T> total;
        Tensor<T> a = reshape(render, {1, render.shape()[0], render.shape()[1], 3});
        Tensor<T> b = reshape(target, {1, target.shape()[0], target.shape()[1], 3});
        for (int scale = 0; scale < 3; ++scale) {
            Tensor<T> a3 = reshape(a, {a.shape()[1], a.shape()[2], int64_t(3)});
            Tensor<T> b3 = reshape(b, {b.shape()[1], b.shape()[2], int64_t(3)});
            auto [agx, agy] = term(a3);
            auto [bgx, bgy] = term(b3);
            Tensor<T> t = add(mean_all(abs(sub(agx, bgx))), mean_all(abs(sub(agy, bgy))));
            total = total.defined() ? add(total, t) : t;
            if (scale < 2) {
                a = bilinear_resize(a, a.shape()[1] / 2, a.shape()[2] / 2);
                b = bilinear_resize(b, b.shape()[1] / 2, b.shape()[2] / 2);
            }
        }
        return total;
    }
};

template <class T>
struct LossBreakdown {
    Tensor<T> total;
    std::array<double, 3> stage_loss{{0, 0, 0}}; // lambda-weighted per-stage values
};

/// Eq. 9: for every computed stage, render its fused set at each target view
/// at full resolution and accumulate the weighted photometric terms.
template <class T>
LossBreakdown<T> compute_loss(const std::vector<StageState<T>>& states,
                              const std::vector<CameraView<T>>& targets, double lambda_mse,
                              double lambda_lpips, const PerceptualLoss<T>* perceptual,
                              const RunOptions& opt) {
    check(!targets.empty(), "loss: needs at least one target view");
    check(lambda_mse >= 0 && lambda_lpips >= 0, "loss: lambda weights must be nonnegative");
    LossBreakdown<T> out;
    for (const auto& st : states) {
        Tensor<T> stage_term;
        for (const auto& tv : targets) {
            auto rendered = render(st.fused, tv.intrinsics, tv.pose, opt.background, opt.render);
            Tensor<T> term = mul_scalar(mse(rendered.color, tv.image), T(lambda_mse));
            if (lambda_lpips > 0 && perceptual)
                term = add(term,
                           mul_scalar(perceptual->compare(rendered.color, tv.image),
                                      T(lambda_lpips)));
            stage_term = stage_term.defined() ? add(stage_term, term) : term;
        }
        stage_term = mul_scalar(stage_term, T(1.0 / double(targets.size())));
        out.stage_loss[size_t(st.stage - 1)] = double(stage_term.item());
        out.total = out.total.defined() ? add(out.total, stage_term) : stage_term;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset plumbing
// ---------------------------------------------------------------------------

struct SceneSample {
    std::vector<io::SceneView> inputs;  // exactly 2
    std::vector<io::SceneView> targets; // >= 1
    double near = 0, far = 0;
};

class SceneProvider {
public:
    virtual ~SceneProvider() = default;
    virtual SceneSample sample(Rng& rng) = 0;
    virtual size_t scene_count() const = 0;
};

inline SceneSample sample_from_scene(const io::Scene& scene) {
    SceneSample s;
    auto ins = scene.inputs();
    check(ins.size() >= 2, "scene has fewer than 2 input views");
    s.inputs = {*ins[0], *ins[1]};
    for (const auto* t : scene.targets()) s.targets.push_back(*t);
    s.near = scene.near;
    s.far = scene.far;
    return s;
}

class SingleSceneProvider final : public SceneProvider {
public:
    explicit SingleSceneProvider(io::Scene scene) : scene_(std::move(scene)) {}
    SceneSample sample(Rng&) override { return sample_from_scene(scene_); }
    size_t scene_count() const override { return 1; }

private:
    io::Scene scene_;
};

class SceneListProvider final : public SceneProvider {
public:
    explicit SceneListProvider(std::vector<io::Scene> scenes) : scenes_(std::move(scenes)) {
        check(!scenes_.empty(), "scene list provider: no scenes");
    }
    SceneSample sample(Rng& rng) override {
        return sample_from_scene(scenes_[size_t(rng.bits() % scenes_.size())]);
    }
    size_t scene_count() const override { return scenes_.size(); }

private:
    std::vector<io::Scene> scenes_;
};

/// Loads either a single scene directory or a directory of scene
/// subdirectories (sorted by name).
inline std::unique_ptr<SceneProvider> load_scene_provider(const std::filesystem::path& dir) {
    if (std::filesystem::exists(dir / "cameras.json"))
        return std::make_unique<SingleSceneProvider>(io::load_scene(dir));
    std::vector<std::filesystem::path> subdirs;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_directory() && std::filesystem::exists(e.path() / "cameras.json"))
            subdirs.push_back(e.path());
    std::sort(subdirs.begin(), subdirs.end());
    check(!subdirs.empty(), "no cameras.json found under ", dir.string());
    std::vector<io::Scene> scenes;
    for (const auto& p : subdirs) scenes.push_back(io::load_scene(p));
    return std::make_unique<SceneListProvider>(std::move(scenes));
}

/// Mirrors a sample horizontally: images flip, cx reflects, and poses are
/// conjugated by diag(-1,1,1) so the mirrored scene stays geometrically
/// consistent (determinant stays +1).
inline void flip_sample_horizontal(SceneSample& sample) {
    auto flip_view = [](io::SceneView& v) {
        const auto& s = v.image.shape();
        int64_t h = s[0], w = s[1];
        Tensor<float> flipped = Tensor<float>::zeros(s);
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x)
                for (int64_t c = 0; c < 3; ++c)
                    flipped.storage()[size_t((y * w + x) * 3 + c)] =
                        v.image.ptr()[(y * w + (w - 1 - x)) * 3 + c];
        v.image = flipped;
        if (v.gt_depth.defined()) {
            Tensor<float> fd = Tensor<float>::zeros(v.gt_depth.shape());
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x)
                    fd.storage()[size_t(y * w + x)] = v.gt_depth.ptr()[y * w + (w - 1 - x)];
            v.gt_depth = fd;
        }
        v.intrinsics.cx = double(w) - v.intrinsics.cx;
        Mat3 r = v.pose.rotation();
        Vec3 t = v.pose.translation();
        Mat3 flipped_r;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                double sign = ((a == 0) != (b == 0)) ? -1.0 : 1.0;
                flipped_r(a, b) = sign * r(a, b);
            }
        v.pose = Pose::from_rt(flipped_r, {-t.x, t.y, t.z});
    };
    for (auto& v : sample.inputs) flip_view(v);
    for (auto& v : sample.targets) flip_view(v);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    int64_t iters = 2000;
    int batch = 1;
    double lr = 2e-4;            // paper peak learning rate
    int64_t warmup_steps = 2000; // paper warm-up length
    uint64_t seed = 0;
    double lambda_mse = 1.0;
    double lambda_lpips = 0.05;  // paper weight; zero-contribution by default
    std::string perceptual = "none"; // "none" | "msgd"
    double eta = 0.1;
    bool flip_augment = false;
    double near_override = 0, far_override = 0;
    int64_t checkpoint_every = 500;

    static TrainConfig from_config(const io::KvConfig& kv) {
        TrainConfig c;
        c.iters = kv.get_int("iters", c.iters);
        c.batch = int(kv.get_int("batch", c.batch));
        c.lr = kv.get_double("lr", c.lr);
        c.warmup_steps = kv.get_int("warmup_steps", c.warmup_steps);
        c.seed = uint64_t(kv.get_int("seed", 0));
        c.lambda_mse = kv.get_double("lambda_mse", c.lambda_mse);
        c.lambda_lpips = kv.get_double("lambda_lpips", c.lambda_lpips);
        c.perceptual = kv.get_string("perceptual", c.perceptual);
        c.eta = kv.get_double("eta", c.eta);
        c.flip_augment = kv.get_bool("flip_augment", c.flip_augment);
        c.near_override = kv.get_double("near", 0);
        c.far_override = kv.get_double("far", 0);
        c.checkpoint_every = kv.get_int("checkpoint_every", c.checkpoint_every);
        validate(c);
        return c;
    }

    static void validate(const TrainConfig& c) {
        check(c.lr > 0, "train config: lr must be positive");
        check(c.lambda_mse >= 0 && c.lambda_lpips >= 0,
              "train config: lambda weights must be nonnegative");
        check(c.iters >= 1 && c.batch >= 1, "train config: iters and batch must be >= 1");
        check(c.perceptual == "none" || c.perceptual == "msgd",
              "train config: perceptual must be none or msgd");
    }
};

template <class T>
std::vector<CameraView<T>> to_camera_views(const std::vector<io::SceneView>& views) {
    std::vector<CameraView<T>> out;
    for (const auto& v : views) {
        CameraView<T> cv;
        cv.intrinsics = v.intrinsics;
        cv.pose = v.pose;
        if constexpr (std::is_same_v<T, float>) {
            cv.image = v.image;
        } else {
            cv.image = Tensor<T>::zeros(v.image.shape());
            for (int64_t i = 0; i < v.image.numel(); ++i) cv.image.ptr()[i] = T(v.image.ptr()[i]);
        }
        out.push_back(std::move(cv));
    }
    return out;
}

struct TrainResult {
    int64_t steps = 0;
    double final_loss = 0;
    std::array<double, 3> final_stage_loss{{0, 0, 0}};
};

/// Adam with linear warm-up and cosine decay. Writes a CSV log
/// (step, loss, per-stage loss, grad norm, lr) and periodic checkpoints.
/// A non-finite loss aborts after dumping the offending batch.
template <class T>
TrainResult train(Model<T>& model, SceneProvider& provider, const TrainConfig& cfg,
                  const std::filesystem::path& checkpoint_path,
                  const std::filesystem::path& log_path) {
    TrainConfig::validate(cfg);
    model.cfg.eta = cfg.eta;
    Adam<T> opt(model.params);
    Rng data_rng(cfg.seed ^ 0xd1b54a32d192ed03ull);
    std::ofstream log(log_path);
    check(log.good(), "train: cannot open log ", log_path.string());
    log << "step,loss,stage1_loss,stage2_loss,stage3_loss,grad_norm,lr\n";

    std::unique_ptr<PerceptualLoss<T>> perceptual;
    if (cfg.perceptual == "msgd") perceptual = std::make_unique<GradientDifferencePerceptual<T>>();

    TrainResult result;
    for (int64_t step = 1; step <= cfg.iters; ++step) {
        model.params.zero_grad();
        double loss_val = 0;
        std::array<double, 3> stage_vals{{0, 0, 0}};
        Tape<T> tape;
        {
            TapeScope<T> scope(tape);
            Tensor<T> batch_total;
            for (int b = 0; b < cfg.batch; ++b) {
                SceneSample sample = provider.sample(data_rng);
                if (cfg.flip_augment && data_rng.uniform() < 0.5) flip_sample_horizontal(sample);
                RunOptions opt_run;
                opt_run.near = cfg.near_override > 0 ? cfg.near_override : sample.near;
                opt_run.far = cfg.far_override > 0 ? cfg.far_override : sample.far;
                auto inputs = to_camera_views<T>(sample.inputs);
                auto targets = to_camera_views<T>(sample.targets);
                auto states = run_stages(inputs, model, opt_run);
                auto loss = compute_loss(states, targets, cfg.lambda_mse, cfg.lambda_lpips,
                                         perceptual.get(), opt_run);
                for (int s = 0; s < 3; ++s) stage_vals[size_t(s)] += loss.stage_loss[size_t(s)];
                batch_total =
                    batch_total.defined() ? add(batch_total, loss.total) : loss.total;
                if (!std::isfinite(double(loss.total.item()))) {
                    auto snap_dir = checkpoint_path.parent_path() / "nan_snapshot";
                    std::filesystem::create_directories(snap_dir);
                    for (size_t i = 0; i < sample.inputs.size(); ++i)
                        io::write_rawf(snap_dir / cat("input_", i, ".rawf"),
                                       sample.inputs[i].image);
                    for (size_t i = 0; i < sample.targets.size(); ++i)
                        io::write_rawf(snap_dir / cat("target_", i, ".rawf"),
                                       sample.targets[i].image);
                    throw Error(cat("train: non-finite loss at step ", step,
                                    "; offending batch dumped to ", snap_dir.string()));
                }
            }
            if (cfg.batch > 1) batch_total = mul_scalar(batch_total, T(1.0 / cfg.batch));
            loss_val = double(batch_total.item());
            tape.backward(batch_total);
        }
        for (auto& v : stage_vals) v /= cfg.batch;
        double gnorm = model.params.grad_norm();
        double lr = lr_schedule(step, cfg.warmup_steps, cfg.iters, cfg.lr);
        opt.step(lr);
        log << step << "," << loss_val << "," << stage_vals[0] << "," << stage_vals[1] << ","
            << stage_vals[2] << "," << gnorm << "," << lr << "\n";
        if (step % cfg.checkpoint_every == 0 || step == cfg.iters) model.save(checkpoint_path);
        result.steps = step;
        result.final_loss = loss_val;
        result.final_stage_loss = stage_vals;
    }
    log.flush();
    return result;
}

// ---------------------------------------------------------------------------
// Inference, metrics, statistics
// ---------------------------------------------------------------------------

template <class T>
struct InferResult {
    std::vector<Tensor<T>> target_renders; // [H,W,3] per target view
    GaussianSet<T> fused;                  // final computed stage's fused set
    std::vector<StageState<T>> states;
    double seconds = 0;
};

/// One feed-forward pass; only the last computed stage's fused Gaussians are
/// rendered at the target cameras. Pure: parameters are never mutated.
template <class T>
InferResult<T> infer(Model<T>& model, const SceneSample& sample, int up_to_stage,
                     const RunOptions& base_opt = {}) {
    auto t0 = std::chrono::steady_clock::now();
    RunOptions opt = base_opt;
    opt.up_to_stage = up_to_stage;
    if (opt.near <= 0) opt.near = sample.near;
    if (opt.far <= 0) opt.far = sample.far;
    auto inputs = to_camera_views<T>(sample.inputs);
    auto targets = to_camera_views<T>(sample.targets);
    InferResult<T> out;
    out.states = run_stages(inputs, model, opt);
    out.fused = out.states.back().fused;
    for (const auto& tv : targets) {
        auto r = render(out.fused, tv.intrinsics, tv.pose, opt.background, opt.render);
        out.target_renders.push_back(r.color);
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

struct StageStats {
    int stage = 0;
    int64_t count = 0;
    double mean_opacity = 0, median_opacity = 0;
    double mean_scale = 0, median_scale = 0;
};

/// Per-stage aggregates of a fused set (the hierarchy diagnostics report).
template <class T>
std::vector<StageStats> gaussian_statistics(const GaussianSet<T>& set) {
    std::vector<StageStats> out;
    for (const auto& blk : set.stages) {
        StageStats s;
        s.stage = blk.stage;
        s.count = blk.count();
        std::vector<double> ops, scales;
        for (int64_t i = 0; i < blk.count(); ++i) ops.push_back(double(blk.opacities.ptr()[i]));
        for (int64_t i = 0; i < blk.count() * 3; ++i)
            scales.push_back(double(blk.scales.ptr()[i]));
        auto agg = [](std::vector<double>& v, double& mean, double& median) {
            if (v.empty()) return;
            double acc = 0;
            for (double x : v) acc += x;
            mean = acc / double(v.size());
            std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(v.size() / 2), v.end());
            median = v[v.size() / 2];
        };
        agg(ops, s.mean_opacity, s.median_opacity);
        agg(scales, s.mean_scale, s.median_scale);
        out.push_back(s);
    }
    return out;
}

} // namespace hgs
