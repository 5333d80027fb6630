// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/gaussian.hpp"

namespace hgs {

/// Eq. 7: resize the current stage's Gaussian features to the earlier
/// stage's grid and concatenate along channels.
template <class T>
Tensor<T> concat_features(const Tensor<T>& f_current, const Tensor<T>& f_earlier) {
    check(f_current.rank() == 4 && f_earlier.rank() == 4 &&
              f_current.shape()[0] == f_earlier.shape()[0],
          "concat_features: expected [N,h,w,C] maps with matching view counts");
    const auto& se = f_earlier.shape();
    Tensor<T> resized = bilinear_resize(f_current, se[1], se[2]);
    return concat<T>({resized, f_earlier}, 3);
}

struct MfmConfig {
    int64_t squeeze_hidden = 16; // MLP1: C_cat -> 16 -> 3
    int64_t mod_hidden = 8;      // MLP2: 3 -> 8 -> 1
};

/// Eq. 8 networks. MLP2's biases stay zero-initialized so that a zero error
/// map yields xi = 0.5 at initialization.
template <class T>
struct MfmParams {
    MfmConfig cfg;
    LinearLayer<T> squeeze1, squeeze2; // MLP1
    LinearLayer<T> mod1, mod2;         // MLP2

    MfmParams() = default;
    MfmParams(ParamRegistry<T>& reg, const std::string& name, const MfmConfig& config,
              int64_t cat_channels)
        : cfg(config) {
        squeeze1 = LinearLayer<T>(reg, name + ".squeeze1", cat_channels, cfg.squeeze_hidden);
        squeeze2 = LinearLayer<T>(reg, name + ".squeeze2", cfg.squeeze_hidden, 3, 1.0);
        mod1 = LinearLayer<T>(reg, name + ".mod1", 3, cfg.mod_hidden);
        mod2 = LinearLayer<T>(reg, name + ".mod2", cfg.mod_hidden, 1, 1.0);
    }
};

/// Eq. 8: xi = sigmoid(MLP2(MLP1(F_cat) * err)). err must already be at the
/// earlier stage's resolution (3 channels). Returns [N,h,w] in [0,1].
template <class T>
Tensor<T> modulation_coefficients(const Tensor<T>& f_cat, const Tensor<T>& err,
                                  const MfmParams<T>& params) {
    check(f_cat.rank() == 4 && err.rank() == 4 && err.shape()[3] == 3 &&
              f_cat.shape()[0] == err.shape()[0] && f_cat.shape()[1] == err.shape()[1] &&
              f_cat.shape()[2] == err.shape()[2],
          "modulation: F_cat ", shape_str(f_cat.shape()), " vs error map ",
          shape_str(err.shape()));
    Tensor<T> squeezed = params.squeeze2(relu(params.squeeze1(f_cat))); // [N,h,w,3]
    Tensor<T> gated = mul(squeezed, err);
    Tensor<T> logits = params.mod2(relu(params.mod1(gated))); // [N,h,w,1]
    const auto& s = f_cat.shape();
    return reshape(sigmoid(logits), {s[0], s[1], s[2]});
}

/// O_k := O_k * xi_k for every earlier stage; the newest stage is untouched.
/// `blocks` carries the current (possibly already modulated) stages 1..i and
/// `xi` one field per earlier stage, at that stage's pixel grid. Returns the
/// fused set; its blocks hold the updated opacity tensors.
template <class T>
GaussianSet<T> fuse(std::vector<StageGaussians<T>> blocks, const std::vector<Tensor<T>>& xi) {
    check(!blocks.empty(), "fuse: no stages");
    check(xi.size() + 1 == blocks.size(), "fuse: got ", xi.size(), " modulation fields for ",
          blocks.size(), " stages");
    for (size_t k = 0; k + 1 < blocks.size(); ++k) {
        const Tensor<T>& field = xi[k];
        check(field.defined() && field.numel() == blocks[k].count(),
              "fuse: modulation field for stage ", k + 1, " has ",
              field.defined() ? field.numel() : 0, " entries, stage has ", blocks[k].count());
        Tensor<T> flat = reshape(field, {field.numel()});
        blocks[k].opacities = mul(blocks[k].opacities, flat);
    }
    GaussianSet<T> fused;
    fused.stages = std::move(blocks);
    return fused;
}

} // namespace hgs
