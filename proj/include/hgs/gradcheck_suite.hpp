// SPDX-License-Identifier: Apache-2.0
#pragma once

// The finite-difference verification suite behind the `gradcheck` command:
// every autodiff primitive elementwise, the splatting backward pass, and a
// full three-stage pipeline at desk scale. All in float64.

#include "hgs/gradcheck.hpp"
#include "hgs/io/synth.hpp"
#include "hgs/pipeline.hpp"
#include "hgs/renderer.hpp"

namespace hgs {

struct GradCheckEntry {
    std::string name;
    double max_rel = 0;
    double tolerance = 0;
    bool pass = false;
};

namespace detail {

template <class F>
void run_case(std::vector<GradCheckEntry>& out, const std::string& name, double tol, F fn) {
    GradCheckEntry e;
    e.name = name;
    e.tolerance = tol;
    FdReport rep = fn();
    e.max_rel = rep.max_rel;
    e.pass = rep.ok(tol);
    out.push_back(std::move(e));
}

} // namespace detail

/// Runs the whole suite; every entry must pass for the artifact's gradient
/// contract to hold (per-primitive 1e-6, composed pipeline 1e-3).
inline std::vector<GradCheckEntry> run_gradient_suite(bool include_pipeline = true) {
    using DT = Tensor<double>;
    std::vector<GradCheckEntry> out;
    const double prim_tol = 1e-6, pipe_tol = 1e-3;
    Rng seed_rng(0x5eed);

    auto uniform = [&](Shape s, double lo = -1.0, double hi = 1.0) {
        return DT::rand_uniform(std::move(s), seed_rng, lo, hi);
    };
    auto offzero = [&](Shape s) {
        DT t = uniform(std::move(s));
        for (auto& v : t.storage()) v += v >= 0 ? 0.05 : -0.05;
        return t;
    };

    detail::run_case(out, "conv2d", prim_tol, [&] {
        DT x = uniform({1, 4, 4, 2}), k = uniform({3, 3, 2, 3});
        return check_gradients({x, k}, [](const std::vector<DT>& in) {
            return sum_all(square(conv2d(in[0], in[1], 1, 1)));
        });
    });
    detail::run_case(out, "conv2d_strided", prim_tol, [&] {
        DT x = uniform({2, 6, 6, 2}), k = uniform({3, 3, 2, 2});
        return check_gradients({x, k}, [](const std::vector<DT>& in) {
            return mean_all(square(conv2d(in[0], in[1], 2, 1)));
        });
    });
    detail::run_case(out, "matmul", prim_tol, [&] {
        DT a = uniform({4, 3}), b = uniform({3, 5});
        return check_gradients({a, b}, [](const std::vector<DT>& in) {
            return sum_all(square(matmul(in[0], in[1])));
        });
    });
    detail::run_case(out, "matmul_batched", prim_tol, [&] {
        DT a = uniform({2, 3, 4}), b = uniform({2, 4, 2});
        return check_gradients({a, b}, [](const std::vector<DT>& in) {
            return sum_all(square(matmul(in[0], in[1])));
        });
    });
    detail::run_case(out, "softmax", prim_tol, [&] {
        DT x = uniform({3, 7}, -4.0, 4.0), w = uniform({3, 7});
        return check_gradients({x}, [&](const std::vector<DT>& in) {
            return sum_all(mul(softmax(in[0], 1), w));
        });
    });
    detail::run_case(out, "layer_norm", prim_tol, [&] {
        DT x = uniform({4, 6}), g = uniform({6}, 0.5, 1.5), b = uniform({6});
        return check_gradients({x, g, b}, [](const std::vector<DT>& in) {
            return sum_all(square(layer_norm(in[0], in[1], in[2])));
        });
    });
    detail::run_case(out, "attention", prim_tol, [&] {
        DT q = uniform({1, 2, 4}), k = uniform({1, 3, 4}), v = uniform({1, 3, 4});
        return check_gradients({q, k, v}, [](const std::vector<DT>& in) {
            return sum_all(square(attention(in[0], in[1], in[2], 2)));
        });
    });
    detail::run_case(out, "bilinear_resize", prim_tol, [&] {
        DT x = uniform({1, 3, 4, 2}), w = uniform({1, 5, 7, 2});
        return check_gradients({x}, [&](const std::vector<DT>& in) {
            return sum_all(mul(bilinear_resize(in[0], 5, 7), w));
        });
    });
    detail::run_case(out, "bilinear_sample", prim_tol, [&] {
        DT src = uniform({5, 6, 2});
        DT coords = uniform({3, 3, 2}, -0.5, 5.5);
        return check_gradients({src}, [&](const std::vector<DT>& in) {
            return sum_all(square(bilinear_sample(in[0], coords)));
        });
    });
    detail::run_case(out, "plane_sweep_warp", prim_tol, [&] {
        Intrinsics intr{10, 10, 4, 3, 8, 6};
        Pose src = Pose::from_rt(Mat3{}, {0.1, -0.05, 0.02});
        DT f = uniform({6, 8, 3});
        return check_gradients({f}, [&](const std::vector<DT>& in) {
            return sum_all(square(
                plane_sweep_warp(in[0], Pose::identity(), src, intr, intr, 1.7)));
        });
    });
    detail::run_case(out, "elementwise", prim_tol, [&] {
        DT x = offzero({3, 5});
        return check_gradients({x}, [](const std::vector<DT>& in) {
            DT t = relu(in[0]);
            t = add(t, sigmoid(in[0]));
            t = add(t, softplus(in[0]));
            t = add(t, abs(in[0]));
            t = add(t, exp(mul_scalar(in[0], 0.3)));
            return sum_all(square(t));
        });
    });
    detail::run_case(out, "log_pow", prim_tol, [&] {
        DT x = uniform({3, 4}, 0.2, 2.0);
        return check_gradients({x}, [](const std::vector<DT>& in) {
            return sum_all(add(square(log(in[0])), pow_scalar(in[0], 1.7)));
        });
    });
    detail::run_case(out, "broadcast_ops", prim_tol, [&] {
        DT a = uniform({2, 3, 4}), bias = uniform({4}), col = uniform({3, 1});
        return check_gradients({a, bias, col}, [](const std::vector<DT>& in) {
            return sum_all(square(mul(add(in[0], in[1]), in[2])));
        });
    });
    detail::run_case(out, "shape_ops", prim_tol, [&] {
        DT x = uniform({2, 3, 4}), y = uniform({2, 2, 4});
        return check_gradients({x, y}, [](const std::vector<DT>& in) {
            DT c = concat<double>({in[0], in[1]}, 1);
            DT t = transpose(c, {2, 0, 1});
            return sum_all(square(slice(reshape(t, {4, 10}), 1, 2, 9)));
        });
    });
    detail::run_case(out, "reductions", prim_tol, [&] {
        DT x = uniform({3, 4, 2});
        return check_gradients({x}, [](const std::vector<DT>& in) {
            DT s = reduce_sum(in[0], 1);
            DT m = reduce_mean(in[0], 0, true);
            DT mx = reduce_max(in[0], 2);
            return add(sum_all(square(s)), add(sum_all(square(m)), sum_all(square(mx))));
        });
    });

    detail::run_case(out, "render_single_primitive", pipe_tol, [&] {
        Rng rng(55);
        StageGaussians<double> b;
        b.stage = 1;
        b.sh_degree = 1;
        b.centers = DT::from_data({1, 3}, {0.1, -0.05, 2.0});
        b.scales = DT::from_data({1, 3}, {0.08, 0.05, 0.06});
        double q[4] = {0.9, 0.2, -0.3, 0.2};
        double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        b.rotations = DT::from_data({1, 4}, {q[0] / n, q[1] / n, q[2] / n, q[3] / n});
        b.opacities = DT::from_data({1}, {0.7});
        b.sh = DT::rand_uniform({1, 12}, rng, -0.2, 0.2);
        Intrinsics intr{20, 20, 6, 6, 12, 12};
        return check_gradients(
            {b.centers, b.scales, b.rotations, b.opacities, b.sh},
            [&](const std::vector<DT>& in) {
                GaussianSet<double> set;
                StageGaussians<double> blk = b;
                blk.centers = in[0];
                blk.scales = in[1];
                blk.rotations = in[2];
                blk.opacities = in[3];
                blk.sh = in[4];
                set.stages.push_back(blk);
                return sum_all(render(set, intr, Pose::identity(), {0.2, 0.1, 0.4}).color);
            });
    });

    if (include_pipeline) {
        detail::run_case(out, "pipeline_end_to_end_16px", pipe_tol, [&] {
            auto dir = std::filesystem::temp_directory_path() / "hgs_gradcheck_scene";
            std::filesystem::remove_all(dir);
            io::synth_scene(dir, io::SynthKind::TexturedCube, 29, 16);
            auto sample = sample_from_scene(io::load_scene(dir));
            ModelConfig mc;
            mc.costvol.candidate_count = 4;
            Model<double> model(61, mc);
            RunOptions opt;
            opt.near = sample.near;
            opt.far = sample.far;
            auto inputs = to_camera_views<double>(sample.inputs);
            auto targets = to_camera_views<double>(sample.targets);
            std::vector<DT> params;
            for (const auto& [_, t] : model.params.entries()) params.push_back(t);
            Rng rng(17);
            // Directional probes cover every parameter jointly; sampled
            // entries would need hours of finite differences at this size.
            return check_directional(
                params,
                [&]() {
                    auto states = run_stages(inputs, model, opt);
                    const PerceptualLoss<double>* none = nullptr;
                    return compute_loss(states, targets, 1.0, 0.0, none, opt).total;
                },
                rng, 1e-5, 3);
        });
    }
    return out;
}

} // namespace hgs
