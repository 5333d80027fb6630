// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/core/nn.hpp"

namespace hgs {

/// Per-channel |rendered - input| at full resolution, area-downsampled to the
/// consuming stage's grid. Both inputs are [N,H,W,3] in [0,1].
template <class T>
Tensor<T> compute_error_map(const Tensor<T>& rendered, const Tensor<T>& input,
                            int64_t stage_h, int64_t stage_w) {
    check(rendered.defined() && input.defined() && rendered.rank() == 4 && input.rank() == 4 &&
              rendered.shape() == input.shape(),
          "error map: shape mismatch ",
          rendered.defined() ? shape_str(rendered.shape()) : "(none)", " vs ",
          input.defined() ? shape_str(input.shape()) : "(none)");
    const auto& s = rendered.shape();
    check(s[1] % stage_h == 0 && s[2] % stage_w == 0 && s[1] / stage_h == s[2] / stage_w,
          "error map: cannot downsample ", s[1], "x", s[2], " to ", stage_h, "x", stage_w);
    Tensor<T> e = abs(sub(rendered, input));
    return area_downsample(e, s[1] / stage_h);
}

struct EamConfig {
    int64_t gs_channels = 32; // C_GS
    int64_t level1 = 32, level2 = 64;
};

/// Lightweight 2-level U-Net over concat(error map, stage features) with a
/// sigmoid offset-degree head and a linear Gaussian-feature head.
template <class T>
struct EamParams {
    EamConfig cfg;
    Conv2dLayer<T> enc0, down, mid, up;
    Conv2dLayer<T> alpha_head, feat_head;

    EamParams() = default;
    EamParams(ParamRegistry<T>& reg, const std::string& name, const EamConfig& config,
              int64_t feat_channels)
        : cfg(config) {
        enc0 = Conv2dLayer<T>(reg, name + ".enc0", 3 + feat_channels, cfg.level1, 3, 1);
        down = Conv2dLayer<T>(reg, name + ".down", cfg.level1, cfg.level2, 3, 2);
        mid = Conv2dLayer<T>(reg, name + ".mid", cfg.level2, cfg.level2, 3, 1);
        up = Conv2dLayer<T>(reg, name + ".up", cfg.level2, cfg.level1, 3, 1);
        alpha_head = Conv2dLayer<T>(reg, name + ".alpha", cfg.level1, 1, 1, 1, 1.0);
        feat_head = Conv2dLayer<T>(reg, name + ".feat", cfg.level1, cfg.gs_channels, 1, 1, 1.0);
    }
};

template <class T>
struct OffsetPrediction {
    Tensor<T> alpha;       // [N,h,w] in [0,1]
    Tensor<T> gs_features; // [N,h,w,C_GS]
};

/// Eq. 5: offset degrees and Gaussian features from the error map and the
/// stage's cross-view features.
template <class T>
OffsetPrediction<T> predict_offsets(const Tensor<T>& error_map, const Tensor<T>& features,
                                    const EamParams<T>& params) {
    check(error_map.rank() == 4 && features.rank() == 4 &&
              error_map.shape()[0] == features.shape()[0] &&
              error_map.shape()[1] == features.shape()[1] &&
              error_map.shape()[2] == features.shape()[2],
          "predict_offsets: error map ",
          shape_str(error_map.shape()), " does not align with features ",
          shape_str(features.shape()));
    const auto& s = features.shape();
    check(s[1] % 2 == 0 && s[2] % 2 == 0, "predict_offsets: stage grid must be even, got ",
          shape_str(s));
    Tensor<T> x = concat<T>({error_map, features}, 3);
    Tensor<T> e0 = relu(params.enc0(x));                       // [N,h,w,32]
    Tensor<T> e1 = relu(params.down(e0));                      // [N,h/2,w/2,64]
    Tensor<T> m = relu(params.mid(e1));                        // [N,h/2,w/2,64]
    Tensor<T> u = params.up(bilinear_resize(m, s[1], s[2]));   // [N,h,w,32]
    Tensor<T> top = relu(add(u, e0));
    OffsetPrediction<T> out;
    out.alpha = reshape(sigmoid(params.alpha_head(top)), {s[0], s[1], s[2]});
    out.gs_features = params.feat_head(top);
    return out;
}

/// Eq. 6: D_i = Interp(D_prev) + (2*alpha - 1) * eta * Interp(D_prev).
/// The offset magnitude is bounded by eta times the upsampled parent depth.
template <class T>
Tensor<T> refine_depth(const Tensor<T>& alpha, const Tensor<T>& depth_prev, double eta) {
    check(eta >= 0.0 && eta <= 1.0, "refine_depth: eta must be in [0,1], got ", eta);
    check(alpha.rank() == 3 && depth_prev.rank() == 3, "refine_depth: rank-3 inputs expected");
    const auto& sa = alpha.shape();
    const auto& sp = depth_prev.shape();
    check(sa[0] == sp[0], "refine_depth: view count mismatch");
    Tensor<T> prev4 = reshape(depth_prev, {sp[0], sp[1], sp[2], 1});
    Tensor<T> interp = reshape(bilinear_resize(prev4, sa[1], sa[2]), sa);
    Tensor<T> swing = add_scalar(mul_scalar(alpha, T(2)), T(-1)); // 2a-1 in [-1,1]
    Tensor<T> delta = mul(mul_scalar(swing, T(eta)), interp);
    return add(interp, delta);
}

} // namespace hgs
