// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/camera.hpp"
#include "hgs/core/nn.hpp"

namespace hgs {

// Real spherical harmonics constants, community splatting convention.
inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.4886025119029199;
inline constexpr double kShC2[5] = {1.0925484305920792, -1.0925484305920792,
                                    0.31539156525252005, -1.0925484305920792,
                                    0.5462742152960396};
inline constexpr double kShC3[7] = {-0.5900435899266435, 2.890611442640554,
                                    -0.4570457994644658, 0.3731763325901154,
                                    -0.4570457994644658, 1.445305721320277,
                                    -0.5900435899266435};

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Fills basis[0..coeffs) with the real SH basis at a unit direction,
/// including the community sign convention used by splat renderers.
inline void sh_basis(int degree, const Vec3& d, double* basis) {
    basis[0] = kShC0;
    if (degree < 1) return;
    basis[1] = -kShC1 * d.y;
    basis[2] = kShC1 * d.z;
    basis[3] = -kShC1 * d.x;
    if (degree < 2) return;
    double xx = d.x * d.x, yy = d.y * d.y, zz = d.z * d.z;
    double xy = d.x * d.y, yz = d.y * d.z, xz = d.x * d.z;
    basis[4] = kShC2[0] * xy;
    basis[5] = kShC2[1] * yz;
    basis[6] = kShC2[2] * (2.0 * zz - xx - yy);
    basis[7] = kShC2[3] * xz;
    basis[8] = kShC2[4] * (xx - yy);
    if (degree < 3) return;
    basis[9] = kShC3[0] * d.y * (3.0 * xx - yy);
    basis[10] = kShC3[1] * xy * d.z;
    basis[11] = kShC3[2] * d.y * (4.0 * zz - xx - yy);
    basis[12] = kShC3[3] * d.z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    basis[13] = kShC3[4] * d.x * (4.0 * zz - xx - yy);
    basis[14] = kShC3[5] * d.z * (xx - yy);
    basis[15] = kShC3[6] * d.x * (xx - 3.0 * yy);
}

/// Evaluates SH color at a unit view direction. Coefficients are laid out
/// coefficient-major: [coeff0 rgb, coeff1 rgb, ...]. The DC term carries the
/// +0.5 offset, and the result is clamped to [0,1] (no sigmoid).
template <class T>
void sh_to_rgb(const T* sh, int degree, const Vec3& view_dir, T* rgb) {
    double basis[16];
    sh_basis(degree, view_dir, basis);
    int coeffs = sh_coeff_count(degree);
    for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.5;
        for (int k = 0; k < coeffs; ++k) acc += basis[k] * double(sh[k * 3 + ch]);
        rgb[ch] = T(std::clamp(acc, 0.0, 1.0));
    }
}

/// One stage's pixel-aligned Gaussians, stored as differentiable tensors.
/// Quaternions are (w,x,y,z), unit norm; scales are metric; opacities (0,1).
template <class T>
struct StageGaussians {
    int stage = 0;
    int sh_degree = 1;
    Tensor<T> centers;   // [M,3]
    Tensor<T> scales;    // [M,3]
    Tensor<T> rotations; // [M,4]
    Tensor<T> opacities; // [M]
    Tensor<T> sh;        // [M, 3*(deg+1)^2]

    int64_t count() const { return centers.defined() ? centers.shape()[0] : 0; }
};

/// Union of stage blocks; the flat index space is the concatenation of the
/// blocks in order, which fixes the render tie-break and export order.
template <class T>
struct GaussianSet {
    std::vector<StageGaussians<T>> stages;

    int64_t size() const {
        int64_t n = 0;
        for (const auto& s : stages) n += s.count();
        return n;
    }

    std::pair<int64_t, int64_t> stage_range(size_t block) const {
        check(block < stages.size(), "stage_range: block ", block, " of ", stages.size());
        int64_t begin = 0;
        for (size_t i = 0; i < block; ++i) begin += stages[i].count();
        return {begin, begin + stages[block].count()};
    }
};

struct GaussianHeadConfig {
    int sh_degree = 1;       // configurable 0..3
    int64_t gs_channels = 32;
    int64_t hidden = 64;
    double opacity_bias = -2.197224577336219; // logit(0.1)
};

/// Stacked-conv decoder with one head per Gaussian parameter group.
template <class T>
struct GaussianHeadParams {
    GaussianHeadConfig cfg;
    Conv2dLayer<T> conv1, conv2;
    Conv2dLayer<T> opacity_head, scale_head, rotation_head, sh_head;

    GaussianHeadParams() = default;
    GaussianHeadParams(ParamRegistry<T>& reg, const std::string& name,
                       const GaussianHeadConfig& config)
        : cfg(config) {
        check(cfg.sh_degree >= 0 && cfg.sh_degree <= 3, "sh_degree must be 0..3, got ",
              cfg.sh_degree);
        conv1 = Conv2dLayer<T>(reg, name + ".conv1", cfg.gs_channels, cfg.hidden, 3, 1);
        conv2 = Conv2dLayer<T>(reg, name + ".conv2", cfg.hidden, cfg.hidden, 3, 1);
        // Parameter heads start at their priors exactly (weights zero):
        // opacity sigmoid(logit(0.1)), scale softplus(0) * footprint, identity
        // rotation. Gradients stay alive through the activations.
        auto zero_weights = [](Conv2dLayer<T>& l) {
            std::fill(l.w.storage().begin(), l.w.storage().end(), T(0));
        };
        opacity_head = Conv2dLayer<T>(reg, name + ".opacity", cfg.hidden, 1, 1, 1, 1.0);
        zero_weights(opacity_head);
        std::fill(opacity_head.b.storage().begin(), opacity_head.b.storage().end(),
                  T(cfg.opacity_bias));
        scale_head = Conv2dLayer<T>(reg, name + ".scale", cfg.hidden, 3, 1, 1, 1.0);
        zero_weights(scale_head);
        rotation_head = Conv2dLayer<T>(reg, name + ".rotation", cfg.hidden, 4, 1, 1, 0.1);
        zero_weights(rotation_head);
        rotation_head.b.storage()[0] = T(1); // identity quaternion prior
        int64_t sh_ch = 3 * sh_coeff_count(cfg.sh_degree);
        sh_head = Conv2dLayer<T>(reg, name + ".sh", cfg.hidden, sh_ch, 1, 1, 1.0);
    }
};

/// Decodes per-pixel Gaussian features + depth into pixel-aligned Gaussians.
/// Centers sit on each pixel's ray at the predicted depth; the scale head is
/// multiplied by the stage's metric pixel footprint at that depth, which makes
/// coarse-stage primitives larger by construction.
template <class T>
StageGaussians<T> predict_gaussians(const Tensor<T>& gs_features, const Tensor<T>& depth,
                                    const std::vector<Intrinsics>& intr,
                                    const std::vector<Pose>& poses,
                                    const GaussianHeadParams<T>& params, int stage) {
    check(gs_features.rank() == 4 && depth.rank() == 3, "predict_gaussians: bad input ranks");
    int64_t n = gs_features.shape()[0], h = gs_features.shape()[1], w = gs_features.shape()[2];
    check(depth.shape() == (Shape{n, h, w}),
          "predict_gaussians: depth ", shape_str(depth.shape()), " vs features ",
          shape_str(gs_features.shape()));
    check(intr.size() == size_t(n) && poses.size() == size_t(n),
          "predict_gaussians: camera count mismatch");
    for (const auto& ic : intr)
        check(ic.width == w && ic.height == h, "predict_gaussians: intrinsics must be rescaled ",
              "to the ", w, "x", h, " stage grid, got ", ic.width, "x", ic.height);
    check(stage >= 1 && stage <= 3, "predict_gaussians: stage must be 1..3");

    const int64_t m = n * h * w;

    Tensor<T> x = relu(params.conv1(gs_features));
    x = relu(params.conv2(x));

    StageGaussians<T> out;
    out.stage = stage;
    out.sh_degree = params.cfg.sh_degree;

    out.opacities = reshape(sigmoid(params.opacity_head(x)), {m});

    // Per-pixel ray directions and camera origins (constants w.r.t. autodiff).
    Tensor<T> dirs = Tensor<T>::zeros({m, 3});
    Tensor<T> origins = Tensor<T>::zeros({m, 3});
    Tensor<T> inv_focal = Tensor<T>::zeros({m, 1}); // metric pixel size at unit depth
    for (int64_t v = 0; v < n; ++v) {
        const Intrinsics& ic = intr[size_t(v)];
        const Pose& pose = poses[size_t(v)];
        Vec3 origin = pose.camera_center();
        Mat3 rt = pose.rotation().transposed();
        for (int64_t py = 0; py < h; ++py)
            for (int64_t px = 0; px < w; ++px) {
                int64_t row = (v * h + py) * w + px;
                double u = double(px) + 0.5, vv = double(py) + 0.5;
                Vec3 cam{(u - ic.cx) / ic.fx, (vv - ic.cy) / ic.fy, 1.0};
                Vec3 world_dir = rt * cam;
                dirs.storage()[size_t(row * 3 + 0)] = T(world_dir.x);
                dirs.storage()[size_t(row * 3 + 1)] = T(world_dir.y);
                dirs.storage()[size_t(row * 3 + 2)] = T(world_dir.z);
                origins.storage()[size_t(row * 3 + 0)] = T(origin.x);
                origins.storage()[size_t(row * 3 + 1)] = T(origin.y);
                origins.storage()[size_t(row * 3 + 2)] = T(origin.z);
                inv_focal.storage()[size_t(row)] = T(1.0 / ic.fx);
            }
    }
    Tensor<T> d_col = reshape(depth, {m, 1});
    out.centers = add(mul(dirs, d_col), origins);

    // softplus(head) scaled by the pixel footprint depth/fx_stage.
    Tensor<T> raw_scale = reshape(softplus(params.scale_head(x)), {m, 3});
    Tensor<T> footprint = mul(d_col, inv_focal);
    out.scales = mul(raw_scale, footprint);

    Tensor<T> raw_rot = reshape(params.rotation_head(x), {m, 4});
    Tensor<T> norm2 = reduce_sum(square(raw_rot), 1, true);
    Tensor<T> inv_norm = pow_scalar(add_scalar(norm2, T(1e-20)), T(-0.5));
    out.rotations = mul(raw_rot, inv_norm);

    out.sh = reshape(params.sh_head(x), {m, 3 * sh_coeff_count(params.cfg.sh_degree)});
    return out;
}

} // namespace hgs
