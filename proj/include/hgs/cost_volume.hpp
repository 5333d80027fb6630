// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/backbone.hpp"
#include "hgs/camera.hpp"

namespace hgs {

/// Plane-sweep depth hypotheses, increasing, with exact endpoints.
struct DepthCandidates {
    std::vector<double> values;
    double near = 0, far = 0;

    int count() const { return int(values.size()); }
};

/// Uniform in inverse depth (disparity) between 1/far and 1/near.
inline DepthCandidates sample_depth_candidates(double near, double far, int count) {
    check(near > 0 && near < far, "depth candidates: need 0 < near < far, got near=", near,
          " far=", far);
    check(count >= 2, "depth candidates: need at least 2, got ", count);
    DepthCandidates c;
    c.near = near;
    c.far = far;
    c.values.resize(size_t(count));
    double inv_near = 1.0 / near, inv_far = 1.0 / far;
    for (int i = 0; i < count; ++i) {
        double t = double(i) / double(count - 1);
        c.values[size_t(i)] = 1.0 / (inv_near + t * (inv_far - inv_near));
    }
    c.values.front() = near; // exact endpoints
    c.values.back() = far;
    return c;
}

struct CostVolumeConfig {
    int candidate_count = 32; // R
    int64_t gs_channels = 32; // C_GS
    int64_t hidden = 64;
};

/// Two-layer refinement CNN over (cost volume ⊕ stage-1 features) producing
/// refined matching logits and the stage-1 Gaussian feature map.
template <class T>
struct CostVolumeParams {
    CostVolumeConfig cfg;
    Conv2dLayer<T> conv1, conv2;

    CostVolumeParams() = default;
    CostVolumeParams(ParamRegistry<T>& reg, const CostVolumeConfig& config, int64_t feat_channels)
        : cfg(config),
          conv1(reg, "costvol.conv1", config.candidate_count + feat_channels, config.hidden, 3, 1),
          conv2(reg, "costvol.conv2", config.hidden, config.candidate_count + config.gs_channels,
                3, 1) {}
};

/// Eq. 3: per-pixel, per-candidate cross-view feature correlation.
/// feat [N,h,w,C] at stage-1 resolution; intrinsics rescaled to that grid.
template <class T>
Tensor<T> build_cost_volume(const Tensor<T>& feat, const std::vector<Intrinsics>& intr,
                            const std::vector<Pose>& poses, const DepthCandidates& cands) {
    check(feat.rank() == 4, "cost volume: features must be [N,h,w,C]");
    int64_t n = feat.shape()[0], h = feat.shape()[1], w = feat.shape()[2], c = feat.shape()[3];
    check(n >= 2, "cost volume: needs at least 2 views, got ", n);
    check(intr.size() == size_t(n) && poses.size() == size_t(n),
          "cost volume: camera count mismatch");
    const T inv_sqrt_c = T(1.0 / std::sqrt(double(c)));

    std::vector<Tensor<T>> per_view;
    for (int64_t i = 0; i < n; ++i) {
        Tensor<T> fi = reshape(slice(feat, 0, i, i + 1), {h, w, c});
        std::vector<Tensor<T>> planes;
        for (int k = 0; k < cands.count(); ++k) {
            double d = cands.values[size_t(k)];
            Tensor<T> acc;
            for (int64_t j = 0; j < n; ++j) {
                if (j == i) continue;
                Tensor<T> fj = reshape(slice(feat, 0, j, j + 1), {h, w, c});
                Tensor<T> warped = plane_sweep_warp(fj, poses[size_t(i)], poses[size_t(j)],
                                                    intr[size_t(i)], intr[size_t(j)], d);
                Tensor<T> dot = reduce_sum(mul(warped, fi), 2, true); // [h,w,1]
                acc = acc.defined() ? add(acc, dot) : dot;
            }
            planes.push_back(mul_scalar(acc, inv_sqrt_c / T(n - 1)));
        }
        per_view.push_back(reshape(concat(planes, 2), {1, h, w, int64_t(cands.count())}));
    }
    return concat(per_view, 0);
}

/// Softmax-expectation over depth candidates: depth = softmax(logits) · V.
/// logits [N,h,w,R] -> depth [N,h,w], always inside [near, far].
template <class T>
Tensor<T> expected_depth(const Tensor<T>& logits, const DepthCandidates& cands) {
    check(logits.shape().back() == cands.count(), "expected_depth: got ", logits.shape().back(),
          " logits per pixel for ", cands.count(), " candidates");
    std::vector<T> vals(cands.values.begin(), cands.values.end());
    Tensor<T> v = Tensor<T>::from_data({int64_t(cands.count())}, std::move(vals));
    Tensor<T> probs = softmax(logits, -1);
    Tensor<T> d = reduce_sum(mul(probs, v), logits.rank() - 1);
    return d;
}

template <class T>
struct Stage1Depth {
    Tensor<T> depth;       // [N,h,w]
    Tensor<T> gs_features; // [N,h,w,C_GS]
    Tensor<T> logits;      // [N,h,w,R] refined matching logits
};

/// Eq. 4 plus the lightweight refinement CNN producing stage-1 Gaussian
/// features alongside the depth expectation.
template <class T>
Stage1Depth<T> estimate_depth_stage1(const Tensor<T>& cost_volume, const Tensor<T>& feat,
                                     const CostVolumeParams<T>& params,
                                     const DepthCandidates& cands) {
    check(cost_volume.rank() == 4 && feat.rank() == 4, "estimate_depth: rank-4 inputs required");
    check(cost_volume.shape()[0] == feat.shape()[0] &&
              cost_volume.shape()[1] == feat.shape()[1] &&
              cost_volume.shape()[2] == feat.shape()[2],
          "estimate_depth: cost volume ", shape_str(cost_volume.shape()),
          " does not align with features ", shape_str(feat.shape()));
    const int r = params.cfg.candidate_count;
    check(cost_volume.shape()[3] == r, "estimate_depth: cost volume has ",
          cost_volume.shape()[3], " candidates, model expects ", r);
    Tensor<T> x = concat<T>({cost_volume, feat}, 3);
    Tensor<T> hdn = relu(params.conv1(x));
    Tensor<T> out = params.conv2(hdn);
    Stage1Depth<T> res;
    res.logits = slice(out, 3, 0, r);
    res.gs_features = slice(out, 3, r, r + params.cfg.gs_channels);
    res.depth = expected_depth(res.logits, cands);
    return res;
}

} // namespace hgs
