// SPDX-License-Identifier: Apache-2.0

#include "hgs/backbone.hpp"
#include "hgs/gradcheck.hpp"

#include <gtest/gtest.h>

using namespace hgs;

namespace {

template <class T>
Tensor<T> random_images(int64_t n, int64_t h, int64_t w, uint64_t seed) {
    Rng rng(seed);
    return Tensor<T>::rand_uniform({n, h, w, 3}, rng, 0.0, 1.0);
}

} // namespace

TEST(Backbone, PyramidShapesFollowStageFormula) {
    ParamRegistry<float> reg(7);
    BackboneParams<float> params(reg, {}, 0);
    ZeroAuxProvider<float> aux;
    auto images = random_images<float>(2, 64, 64, 1);
    auto pyr = extract_pyramid(images, params, aux);
    EXPECT_EQ(pyr.f1.shape(), (Shape{2, 16, 16, 128}));
    EXPECT_EQ(pyr.f2.shape(), (Shape{2, 32, 32, 64}));
    EXPECT_EQ(pyr.f3.shape(), (Shape{2, 64, 64, 32}));
    for (int i = 1; i <= 3; ++i)
        for (float v : pyr.stage(i).storage()) ASSERT_TRUE(std::isfinite(v));
}

TEST(Backbone, RejectsIndivisibleExtentsAndSingleView) {
    ParamRegistry<float> reg(7);
    BackboneParams<float> params(reg, {}, 0);
    ZeroAuxProvider<float> aux;
    try {
        extract_pyramid(random_images<float>(2, 60, 64, 2), params, aux);
        FAIL() << "expected rejection";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("pad"), std::string::npos);
    }
    EXPECT_THROW(extract_pyramid(random_images<float>(1, 64, 64, 3), params, aux), Error);
}

TEST(Backbone, ZeroAuxProviderMatchesPureUNet) {
    // Same seed: shared layers get identical weights because the aux
    // adapters are registered last.
    ParamRegistry<float> reg_plain(11);
    BackboneParams<float> plain(reg_plain, {}, 0);
    ParamRegistry<float> reg_aux(11);
    BackboneParams<float> with_aux(reg_aux, {}, 4);

    // A provider that returns zeros with nonzero channel count.
    class ZeroWide final : public AuxFeatureProvider<float> {
    public:
        int64_t channels() const override { return 4; }
        Tensor<float> compute(const Tensor<float>& images) const override {
            const auto& s = images.shape();
            return Tensor<float>::zeros({s[0], s[1] / 8, s[2] / 8, 4});
        }
    } zero_wide;
    ZeroAuxProvider<float> none;

    auto images = random_images<float>(2, 16, 16, 4);
    auto a = extract_pyramid(images, plain, none);
    auto b = extract_pyramid(images, with_aux, zero_wide);
    for (int i = 1; i <= 3; ++i) {
        ASSERT_EQ(a.stage(i).shape(), b.stage(i).shape());
        for (int64_t j = 0; j < a.stage(i).numel(); ++j)
            ASSERT_FLOAT_EQ(a.stage(i).ptr()[j], b.stage(i).ptr()[j]);
    }
}

TEST(Backbone, ViewSwapPermutesEveryStage) {
    ParamRegistry<float> reg(13);
    BackboneParams<float> params(reg, {}, 0);
    ZeroAuxProvider<float> aux;
    auto images = random_images<float>(2, 16, 16, 5);
    Tensor<float> swapped =
        concat<float>({slice(images, 0, 1, 2), slice(images, 0, 0, 1)}, 0);
    auto a = extract_pyramid(images, params, aux);
    auto b = extract_pyramid(swapped, params, aux);
    for (int i = 1; i <= 3; ++i) {
        const auto& fa = a.stage(i);
        const auto& fb = b.stage(i);
        int64_t per_view = fa.numel() / 2;
        for (int64_t j = 0; j < per_view; ++j) {
            ASSERT_FLOAT_EQ(fa.ptr()[j], fb.ptr()[per_view + j]);
            ASSERT_FLOAT_EQ(fa.ptr()[per_view + j], fb.ptr()[j]);
        }
    }
}

TEST(CrossViewExchange, ZeroedCrossProjectionIsSelfOnly) {
    ParamRegistry<float> reg(17);
    BackboneParams<float> params(reg, {.stage1_channels = 32, .heads = 4,
                                       .transformer_pairs = 2},
                                 0);
    for (auto& layer : params.cross_layers) {
        std::fill(layer.o.w.storage().begin(), layer.o.w.storage().end(), 0.0f);
        std::fill(layer.o.b.storage().begin(), layer.o.b.storage().end(), 0.0f);
    }
    Rng rng(6);
    Tensor<float> x = Tensor<float>::rand_uniform({2, 4, 4, 32}, rng, -1.0, 1.0);
    Tensor<float> got = cross_view_exchange(x, params);

    // Reference: only the self layers, applied in order.
    Tensor<float> ref = reshape(x, {2, 16, 32});
    for (const auto& layer : params.self_layers) {
        Tensor<float> normed = layer.ln(ref);
        Tensor<float> out =
            attention(layer.q(normed), layer.k(normed), layer.v(normed), params.cfg.heads);
        ref = add(ref, layer.o(out));
    }
    ref = reshape(ref, {2, 4, 4, 32});
    for (int64_t i = 0; i < got.numel(); ++i) ASSERT_FLOAT_EQ(got.ptr()[i], ref.ptr()[i]);
}

TEST(CrossViewExchange, DuplicatedViewsGetIdenticalOutputs) {
    ParamRegistry<float> reg(19);
    BackboneParams<float> params(reg, {.stage1_channels = 32, .heads = 2,
                                       .transformer_pairs = 1},
                                 0);
    Rng rng(9);
    Tensor<float> one = Tensor<float>::rand_uniform({1, 4, 4, 32}, rng, -1.0, 1.0);
    Tensor<float> both = concat<float>({one, one}, 0);
    Tensor<float> y = cross_view_exchange(both, params);
    int64_t per_view = y.numel() / 2;
    for (int64_t i = 0; i < per_view; ++i)
        ASSERT_FLOAT_EQ(y.ptr()[i], y.ptr()[per_view + i]);
}

TEST(CrossViewExchange, GradientFlowsAcrossViews) {
    // Gradient of a view-0-only loss must reach view 1's input.
    ParamRegistry<double> reg(23);
    BackboneParams<double> params(reg, {.stage1_channels = 16, .heads = 2,
                                        .transformer_pairs = 1},
                                  0);
    Rng rng(10);
    Tensor<double> x = Tensor<double>::rand_uniform({2, 2, 2, 16}, rng, -1.0, 1.0);
    x.set_requires_grad(true);
    Tape<double> tape;
    {
        TapeScope<double> scope(tape);
        Tensor<double> y = cross_view_exchange(x, params);
        Tensor<double> view0 = slice(y, 0, 0, 1);
        tape.backward(sum_all(square(view0)));
    }
    double view1_grad_norm = 0;
    int64_t per_view = x.numel() / 2;
    for (int64_t i = per_view; i < x.numel(); ++i)
        view1_grad_norm += x.grad()[size_t(i)] * x.grad()[size_t(i)];
    EXPECT_GT(std::sqrt(view1_grad_norm), 1e-8);
}

TEST(AuxProviders, DefaultIsZero) {
    ZeroAuxProvider<float> aux;
    auto z = aux.compute(random_images<float>(2, 16, 16, 11));
    for (float v : z.storage()) ASSERT_EQ(v, 0.0f);
    EXPECT_EQ(aux.channels(), 0);
}

TEST(AuxProviders, PatchProjectionConstantImage) {
    PatchProjectionAux<float> aux(8);
    Tensor<float> images = Tensor<float>::full({1, 32, 32, 3}, 0.4f);
    auto f = aux.compute(images);
    ASSERT_EQ(f.shape(), (Shape{1, 4, 4, 8}));
    // Shift invariance on a constant image: all patches project identically.
    for (int64_t p = 1; p < 16; ++p)
        for (int64_t c = 0; c < 8; ++c)
            ASSERT_FLOAT_EQ(f.ptr()[p * 8 + c], f.ptr()[c]);
    // Bilinear resize preserves the constant feature exactly.
    auto up = bilinear_resize(f, 16, 16);
    for (int64_t c = 0; c < 8; ++c)
        for (int64_t p = 0; p < 256; ++p) ASSERT_FLOAT_EQ(up.ptr()[p * 8 + c], f.ptr()[c]);
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
}
