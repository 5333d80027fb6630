// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/core/nn.hpp"

#include <memory>

namespace hgs {

/// Three-scale cross-view features; stage i has spatial extent
/// H/2^(3-i) x W/2^(3-i) and C/2^(i-1) channels.
template <class T>
struct FeaturePyramid {
    Tensor<T> f1; // [N, H/4, W/4, C]
    Tensor<T> f2; // [N, H/2, W/2, C/2]
    Tensor<T> f3; // [N, H,   W,   C/4]

    const Tensor<T>& stage(int i) const {
        check(i >= 1 && i <= 3, "pyramid stage must be 1..3, got ", i);
        return i == 1 ? f1 : (i == 2 ? f2 : f3);
    }
};

/// Per-view auxiliary features added into every pyramid stage (Eq. 1's
/// second term). channels() == 0 disables the auxiliary path entirely.
template <class T>
class AuxFeatureProvider {
public:
    virtual ~AuxFeatureProvider() = default;
    virtual int64_t channels() const = 0;
    /// images [N,H,W,3] -> [N,h,w,channels()]
    virtual Tensor<T> compute(const Tensor<T>& images) const = 0;
};

template <class T>
class ZeroAuxProvider final : public AuxFeatureProvider<T> {
public:
    int64_t channels() const override { return 0; }
    Tensor<T> compute(const Tensor<T>& images) const override {
        const auto& s = images.shape();
        return Tensor<T>::zeros({s[0], std::max<int64_t>(1, s[1] / 8),
                                 std::max<int64_t>(1, s[2] / 8), 1});
    }
};

/// Fixed (non-learned) random projection of 8x8 image patches. A stand-in
/// for an external feature extractor; deterministic given its seed.
template <class T>
class PatchProjectionAux final : public AuxFeatureProvider<T> {
public:
    explicit PatchProjectionAux(int64_t out_channels = 16, uint64_t seed = 0x9d5f)
        : channels_(out_channels) {
        Rng rng(seed);
        proj_ = Tensor<T>::rand_normal({8 * 8 * 3, channels_}, rng, 0.0,
                                       1.0 / std::sqrt(8.0 * 8.0 * 3.0));
    }

    int64_t channels() const override { return channels_; }

    Tensor<T> compute(const Tensor<T>& images) const override {
        const auto& s = images.shape();
        check(s[1] % 8 == 0 && s[2] % 8 == 0, "patch features need extents divisible by 8");
        int64_t n = s[0], hb = s[1] / 8, wb = s[2] / 8;
        Tensor<T> t = reshape(images, {n, hb, 8, wb, 8, 3});
        t = transpose(t, {0, 1, 3, 2, 4, 5});
        t = reshape(t, {n * hb * wb, 8 * 8 * 3});
        t = matmul(t, proj_);
        return reshape(t, {n, hb, wb, channels_});
    }

private:
    int64_t channels_;
    Tensor<T> proj_;
};

template <class T>
struct ResDownBlock {
    Conv2dLayer<T> conv1, conv2, skip;

    ResDownBlock() = default;
    ResDownBlock(ParamRegistry<T>& reg, const std::string& name, int64_t cin, int64_t cout)
        : conv1(reg, name + ".conv1", cin, cout, 3, 2),
          conv2(reg, name + ".conv2", cout, cout, 3, 1),
          skip(reg, name + ".skip", cin, cout, 1, 2, 1.0) {}

    Tensor<T> operator()(const Tensor<T>& x) const {
        return relu(add(conv2(relu(conv1(x))), skip(x)));
    }
};

/// One pre-norm attention layer (projections + residual). Whether it runs
/// self- or cross-attention is decided by the token sets passed in.
template <class T>
struct AttnLayer {
    LayerNormLayer<T> ln;
    LinearLayer<T> q, k, v, o;

    AttnLayer() = default;
    AttnLayer(ParamRegistry<T>& reg, const std::string& name, int64_t dim)
        : ln(reg, name + ".ln", dim),
          q(reg, name + ".q", dim, dim, 1.0),
          k(reg, name + ".k", dim, dim, 1.0),
          v(reg, name + ".v", dim, dim, 1.0),
          o(reg, name + ".o", dim, dim, 1.0) {}
};

struct BackboneConfig {
    int64_t stage1_channels = 128; // C of Eq. 1; also the deepest encoder width
    int heads = 4;
    int transformer_pairs = 2; // alternating (self, cross) layer pairs
};

template <class T>
struct BackboneParams {
    BackboneConfig cfg;
    int64_t aux_channels = 0;

    ResDownBlock<T> enc1, enc2, enc3;
    std::vector<AttnLayer<T>> self_layers, cross_layers;
    Conv2dLayer<T> up1, ref1, up2, ref2, up3, ref3;
    Conv2dLayer<T> head1, head2, head3;
    Conv2dLayer<T> aux1, aux2, aux3;

    BackboneParams() = default;
    BackboneParams(ParamRegistry<T>& reg, const BackboneConfig& config, int64_t aux_ch)
        : cfg(config), aux_channels(aux_ch) {
        const int64_t c = cfg.stage1_channels; // 128 by default
        const int64_t e1 = 32, e2 = 64, e3 = c; // encoder widths [32,64,128]
        enc1 = ResDownBlock<T>(reg, "backbone.enc1", 3, e1);
        enc2 = ResDownBlock<T>(reg, "backbone.enc2", e1, e2);
        enc3 = ResDownBlock<T>(reg, "backbone.enc3", e2, e3);
        for (int i = 0; i < cfg.transformer_pairs; ++i) {
            self_layers.emplace_back(reg, cat("backbone.tf", i, ".self"), e3);
            cross_layers.emplace_back(reg, cat("backbone.tf", i, ".cross"), e3);
        }
        up1 = Conv2dLayer<T>(reg, "backbone.up1", e3, e2, 3, 1);
        ref1 = Conv2dLayer<T>(reg, "backbone.ref1", e2, e2, 3, 1);
        up2 = Conv2dLayer<T>(reg, "backbone.up2", e2, e1, 3, 1);
        ref2 = Conv2dLayer<T>(reg, "backbone.ref2", e1, e1, 3, 1);
        up3 = Conv2dLayer<T>(reg, "backbone.up3", e1, e1, 3, 1);
        ref3 = Conv2dLayer<T>(reg, "backbone.ref3", e1, e1, 3, 1);
        head1 = Conv2dLayer<T>(reg, "backbone.head1", e2, c, 3, 1);
        head2 = Conv2dLayer<T>(reg, "backbone.head2", e1, c / 2, 3, 1);
        head3 = Conv2dLayer<T>(reg, "backbone.head3", e1, c / 4, 3, 1);
        if (aux_channels > 0) {
            aux1 = Conv2dLayer<T>(reg, "backbone.aux1", aux_channels, c, 1, 1, 1.0);
            aux2 = Conv2dLayer<T>(reg, "backbone.aux2", aux_channels, c / 2, 1, 1, 1.0);
            aux3 = Conv2dLayer<T>(reg, "backbone.aux3", aux_channels, c / 4, 1, 1, 1.0);
        }
    }
};

namespace detail {

template <class T>
Tensor<T> attn_residual(const AttnLayer<T>& layer, const Tensor<T>& x_tokens,
                        const Tensor<T>& q_src, const Tensor<T>& kv_src, int heads) {
    Tensor<T> out = attention(layer.q(q_src), layer.k(kv_src), layer.v(kv_src), heads);
    return add(x_tokens, layer.o(out));
}

} // namespace detail

/// Alternating self- and cross-view attention over bottleneck tokens.
/// Shape-preserving: [N,h,w,c] -> [N,h,w,c]. Requires N >= 2.
template <class T>
Tensor<T> cross_view_exchange(const Tensor<T>& bottleneck, const BackboneParams<T>& params) {
    check(bottleneck.rank() == 4, "cross_view_exchange: expected [N,h,w,c]");
    const auto& s = bottleneck.shape();
    int64_t n = s[0], tokens = s[1] * s[2], dim = s[3];
    check(n >= 2, "cross_view_exchange: needs at least 2 views, got ", n);
    Tensor<T> x = reshape(bottleneck, {n, tokens, dim});
    for (size_t l = 0; l < params.self_layers.size(); ++l) {
        // Self-attention: every view attends to its own tokens.
        {
            const auto& layer = params.self_layers[l];
            Tensor<T> normed = layer.ln(x);
            x = detail::attn_residual(layer, x, normed, normed, params.cfg.heads);
        }
        // Cross-attention: each view attends to all other views' tokens.
        {
            const auto& layer = params.cross_layers[l];
            Tensor<T> normed = layer.ln(x);
            std::vector<Tensor<T>> outs;
            for (int64_t i = 0; i < n; ++i) {
                Tensor<T> xi = slice(x, 0, i, i + 1);
                Tensor<T> qi = slice(normed, 0, i, i + 1);
                std::vector<Tensor<T>> others;
                for (int64_t j = 0; j < n; ++j)
                    if (j != i) others.push_back(slice(normed, 0, j, j + 1));
                Tensor<T> kv = others.size() == 1 ? others[0] : concat(others, 1);
                outs.push_back(detail::attn_residual(layer, xi, qi, kv, params.cfg.heads));
            }
            x = concat(outs, 0);
        }
    }
    return reshape(x, {n, s[1], s[2], dim});
}

namespace detail {

template <class T>
Tensor<T> up_block(const Tensor<T>& x, const Conv2dLayer<T>& up, const Conv2dLayer<T>& refine,
                   const Tensor<T>* skip_feat) {
    const auto& s = x.shape();
    Tensor<T> y = up(bilinear_resize(x, s[1] * 2, s[2] * 2));
    if (skip_feat) y = add(y, *skip_feat);
    y = relu(y);
    return relu(add(refine(y), y));
}

} // namespace detail

/// Eq. 1: per-stage cross-view features from the shared U-Net + transformer,
/// plus resized/projected auxiliary features.
template <class T>
FeaturePyramid<T> extract_pyramid(const Tensor<T>& images, const BackboneParams<T>& params,
                                  const AuxFeatureProvider<T>& aux) {
    check(images.rank() == 4 && images.shape()[3] == 3,
          "extract_pyramid: images must be [N,H,W,3], got ", shape_str(images.shape()));
    const auto& s = images.shape();
    int64_t n = s[0], h = s[1], w = s[2];
    check(n >= 2, "extract_pyramid: needs at least 2 views, got ", n);
    check(h % 8 == 0 && w % 8 == 0, "extract_pyramid: extents ", h, "x", w,
          " must be divisible by 8; pad the input to the next multiple of 8");

    Tensor<T> e1 = params.enc1(images); // [N, H/2, 32]
    Tensor<T> e2 = params.enc2(e1);     // [N, H/4, 64]
    Tensor<T> e3 = params.enc3(e2);     // [N, H/8, 128]

    Tensor<T> mixed = cross_view_exchange(e3, params);

    Tensor<T> d1 = detail::up_block(mixed, params.up1, params.ref1, &e2); // [N, H/4, 64]
    Tensor<T> d2 = detail::up_block(d1, params.up2, params.ref2, &e1);    // [N, H/2, 32]
    Tensor<T> d3 = detail::up_block<T>(d2, params.up3, params.ref3, nullptr); // [N, H, 32]

    FeaturePyramid<T> pyr;
    pyr.f1 = params.head1(d1);
    pyr.f2 = params.head2(d2);
    pyr.f3 = params.head3(d3);

    if (params.aux_channels > 0) {
        check(aux.channels() == params.aux_channels,
              "extract_pyramid: provider supplies ", aux.channels(),
              " aux channels but the model was built for ", params.aux_channels);
        Tensor<T> a = aux.compute(images);
        pyr.f1 = add(pyr.f1, params.aux1(bilinear_resize(a, h / 4, w / 4)));
        pyr.f2 = add(pyr.f2, params.aux2(bilinear_resize(a, h / 2, w / 2)));
        pyr.f3 = add(pyr.f3, params.aux3(bilinear_resize(a, h, w)));
    }
    return pyr;
}

} // namespace hgs
