// SPDX-License-Identifier: Apache-2.0

#include "hgs/error_aware.hpp"
#include "hgs/fusion.hpp"
#include "hgs/gradcheck.hpp"

#include <gtest/gtest.h>

using namespace hgs;
using DT = Tensor<double>;

TEST(ErrorMap, ZeroWhenRenderEqualsInput) {
    Rng rng(1);
    DT img = DT::rand_uniform({2, 8, 8, 3}, rng);
    DT e = compute_error_map(img, img, 4, 4);
    ASSERT_EQ(e.shape(), (Shape{2, 4, 4, 3}));
    for (int64_t i = 0; i < e.numel(); ++i) EXPECT_EQ(e.ptr()[i], 0.0);
}

TEST(ErrorMap, SymmetricInArguments) {
    Rng rng(2);
    DT a = DT::rand_uniform({1, 8, 8, 3}, rng);
    DT b = DT::rand_uniform({1, 8, 8, 3}, rng);
    DT e1 = compute_error_map(a, b, 8, 8);
    DT e2 = compute_error_map(b, a, 8, 8);
    for (int64_t i = 0; i < e1.numel(); ++i) EXPECT_DOUBLE_EQ(e1.ptr()[i], e2.ptr()[i]);
}

TEST(ErrorMap, ConstantDifferenceSurvivesDownsampling) {
    DT r = DT::full({1, 16, 16, 3}, 0.25);
    DT i = DT::full({1, 16, 16, 3}, 0.75);
    for (int64_t res : {16, 8, 4}) {
        DT e = compute_error_map(r, i, res, res);
        for (int64_t k = 0; k < e.numel(); ++k) EXPECT_NEAR(e.ptr()[k], 0.5, 1e-12);
    }
}

TEST(ErrorMap, RejectsShapeMismatch) {
    DT a = DT::zeros({1, 8, 8, 3});
    DT b = DT::zeros({1, 4, 4, 3});
    EXPECT_THROW(compute_error_map(a, b, 4, 4), Error);
}

TEST(PredictOffsets, RangeShapesAndErrorAwareness) {
    const int64_t n = 2, h = 8, w = 8, cf = 16;
    EamConfig cfg;
    cfg.gs_channels = 12;
    ParamRegistry<double> reg(5);
    EamParams<double> params(reg, "eam", cfg, cf);
    Rng rng(6);
    DT err = DT::rand_uniform({n, h, w, 3}, rng, 0.0, 0.5);
    DT feat = DT::rand_uniform({n, h, w, cf}, rng, -1.0, 1.0);
    auto out = predict_offsets(err, feat, params);
    EXPECT_EQ(out.alpha.shape(), (Shape{n, h, w}));
    EXPECT_EQ(out.gs_features.shape(), (Shape{n, h, w, 12}));
    for (int64_t i = 0; i < out.alpha.numel(); ++i) {
        EXPECT_GE(out.alpha.ptr()[i], 0.0);
        EXPECT_LE(out.alpha.ptr()[i], 1.0);
    }

    // Gradient must flow from alpha back to the error map.
    err.set_requires_grad(true);
    Tape<double> tape;
    {
        TapeScope<double> scope(tape);
        auto pred = predict_offsets(err, feat, params);
        tape.backward(sum_all(square(pred.alpha)));
    }
    double norm = 0;
    for (double g : err.grad()) norm += g * g;
    EXPECT_GT(std::sqrt(norm), 1e-10);
}

TEST(RefineDepth, HalfAlphaIsExactInterpolation) {
    Rng rng(7);
    DT prev = DT::rand_uniform({2, 4, 4}, rng, 1.0, 3.0);
    DT alpha = DT::full({2, 8, 8}, 0.5);
    DT refined = refine_depth(alpha, prev, 0.1);
    DT interp = reshape(bilinear_resize(reshape(prev, {2, 4, 4, 1}), 8, 8), {2, 8, 8});
    for (int64_t i = 0; i < refined.numel(); ++i)
        EXPECT_EQ(refined.ptr()[i], interp.ptr()[i]); // (2*0.5-1) == 0 exactly
}

TEST(RefineDepth, ExtremeAlphasHitTheEtaBounds) {
    DT prev = DT::full({1, 4, 4}, 2.0);
    DT up = refine_depth(DT::full({1, 4, 4}, 1.0), prev, 0.1);
    DT dn = refine_depth(DT::full({1, 4, 4}, 0.0), prev, 0.1);
    for (int64_t i = 0; i < up.numel(); ++i) {
        EXPECT_NEAR(up.ptr()[i], 2.2, 1e-12);
        EXPECT_NEAR(dn.ptr()[i], 1.8, 1e-12);
    }
}

TEST(RefineDepth, BoundHoldsUnderFuzz) {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        double eta = rng.uniform(0.0, 1.0);
        DT prev = DT::rand_uniform({1, 3, 3}, rng, 0.5, 5.0);
        DT alpha = DT::rand_uniform({1, 6, 6}, rng, 0.0, 1.0);
        DT refined = refine_depth(alpha, prev, eta);
        DT interp = reshape(bilinear_resize(reshape(prev, {1, 3, 3, 1}), 6, 6), {1, 6, 6});
        for (int64_t i = 0; i < refined.numel(); ++i) {
            EXPECT_GE(refined.ptr()[i], (1.0 - eta) * interp.ptr()[i] - 1e-12);
            EXPECT_LE(refined.ptr()[i], (1.0 + eta) * interp.ptr()[i] + 1e-12);
        }
    }
    EXPECT_THROW(refine_depth(DT::zeros({1, 2, 2}), DT::full({1, 1, 1}, 1.0), 1.5), Error);
}

TEST(RefineDepth, DifferentiableInBothInputs) {
    Rng rng(9);
    DT prev = DT::rand_uniform({1, 3, 3}, rng, 1.0, 2.0);
    DT alpha = DT::rand_uniform({1, 6, 6}, rng, 0.1, 0.9);
    auto rep = check_gradients({alpha, prev}, [](const std::vector<DT>& in) {
        return sum_all(square(refine_depth(in[0], in[1], 0.1)));
    });
    EXPECT_LT(rep.max_rel, 1e-6) << rep.worst_site;
}

TEST(ConcatFeatures, ChannelArithmeticAndConstantResize) {
    Rng rng(10);
    DT cur = DT::rand_uniform({2, 8, 8, 32}, rng);
    DT prev = DT::rand_uniform({2, 4, 4, 32}, rng);
    DT cat = concat_features(cur, prev);
    EXPECT_EQ(cat.shape(), (Shape{2, 4, 4, 64}));

    // Equal resolutions: pure concat, zero resampling error.
    DT same = concat_features(cur, cur);
    for (int64_t i = 0; i < 2 * 8 * 8; ++i)
        for (int64_t c = 0; c < 32; ++c) {
            EXPECT_EQ(same.ptr()[i * 64 + c], cur.ptr()[i * 32 + c]);
            EXPECT_EQ(same.ptr()[i * 64 + 32 + c], cur.ptr()[i * 32 + c]);
        }

    // Constant current features stay constant through the resize half.
    DT cconst = DT::full({2, 8, 8, 4}, 0.31);
    DT prev4 = DT::rand_uniform({2, 4, 4, 4}, rng);
    DT mixed = concat_features(cconst, prev4);
    for (int64_t i = 0; i < 2 * 4 * 4; ++i)
        for (int64_t c = 0; c < 4; ++c) EXPECT_NEAR(mixed.ptr()[i * 8 + c], 0.31, 1e-12);
}

TEST(Modulation, ZeroErrorGivesHalfAtInit) {
    ParamRegistry<double> reg(11);
    MfmParams<double> params(reg, "mfm", {}, 64);
    Rng rng(12);
    DT fcat = DT::rand_uniform({2, 4, 4, 64}, rng, -1.0, 1.0);
    DT err0 = DT::zeros({2, 4, 4, 3});
    DT xi = modulation_coefficients(fcat, err0, params);
    ASSERT_EQ(xi.shape(), (Shape{2, 4, 4}));
    for (int64_t i = 0; i < xi.numel(); ++i) EXPECT_DOUBLE_EQ(xi.ptr()[i], 0.5);
}

TEST(Modulation, RangeAndErrorSensitivity) {
    ParamRegistry<double> reg(13);
    MfmParams<double> params(reg, "mfm", {}, 64);
    Rng rng(14);
    DT fcat = DT::rand_uniform({1, 4, 4, 64}, rng, -1.0, 1.0);
    DT err1 = DT::full({1, 4, 4, 3}, 1.0);
    DT err0 = DT::zeros({1, 4, 4, 3});
    DT xi1 = modulation_coefficients(fcat, err1, params);
    DT xi0 = modulation_coefficients(fcat, err0, params);
    double diff = 0;
    for (int64_t i = 0; i < xi1.numel(); ++i) {
        EXPECT_GE(xi1.ptr()[i], 0.0);
        EXPECT_LE(xi1.ptr()[i], 1.0);
        diff += std::fabs(xi1.ptr()[i] - xi0.ptr()[i]);
    }
    EXPECT_GT(diff, 1e-9); // the error map gates the output
}

namespace {

StageGaussians<double> tiny_block(int stage, int64_t m, uint64_t seed) {
    Rng rng(seed);
    StageGaussians<double> b;
    b.stage = stage;
    b.sh_degree = 0;
    b.centers = DT::rand_uniform({m, 3}, rng, -1.0, 1.0);
    b.scales = DT::rand_uniform({m, 3}, rng, 0.01, 0.1);
    b.rotations = DT::zeros({m, 4});
    for (int64_t i = 0; i < m; ++i) b.rotations.storage()[size_t(i * 4)] = 1.0;
    b.opacities = DT::rand_uniform({m}, rng, 0.1, 0.9);
    b.sh = DT::rand_uniform({m, 3}, rng, -0.3, 0.3);
    return b;
}

} // namespace

TEST(Fuse, UnityModulationIsPlainUnion) {
    auto b1 = tiny_block(1, 4, 20);
    auto b2 = tiny_block(2, 16, 21);
    DT xi = DT::full({1, 2, 2}, 1.0);
    auto fused = fuse<double>({b1, b2}, {xi});
    EXPECT_EQ(fused.size(), 20);
    auto [lo, hi] = fused.stage_range(0);
    EXPECT_EQ(lo, 0);
    EXPECT_EQ(hi, 4);
    for (int64_t i = 0; i < 4; ++i)
        EXPECT_DOUBLE_EQ(fused.stages[0].opacities.ptr()[i], b1.opacities.ptr()[i]);
}

TEST(Fuse, OpacitiesNeverIncreaseAndCountsAdd) {
    Rng rng(22);
    auto b1 = tiny_block(1, 4, 23);
    auto b2 = tiny_block(2, 16, 24);
    auto b3 = tiny_block(3, 64, 25);
    DT xi1 = DT::rand_uniform({1, 2, 2}, rng, 0.0, 1.0);
    DT xi2 = DT::rand_uniform({1, 4, 4}, rng, 0.0, 1.0);
    auto fused = fuse<double>({b1, b2, b3}, {xi1, xi2});
    EXPECT_EQ(fused.size(), 4 + 16 + 64);
    for (int64_t i = 0; i < 4; ++i)
        EXPECT_LE(fused.stages[0].opacities.ptr()[i], b1.opacities.ptr()[i]);
    for (int64_t i = 0; i < 16; ++i)
        EXPECT_LE(fused.stages[1].opacities.ptr()[i], b2.opacities.ptr()[i]);
    for (int64_t i = 0; i < 64; ++i)
        EXPECT_DOUBLE_EQ(fused.stages[2].opacities.ptr()[i], b3.opacities.ptr()[i]);
}

TEST(Fuse, CumulativeModulationAcrossStages) {
    // Stage-1 opacities after the stage-3 fusion equal O * xi^(2) * xi^(3).
    Rng rng(26);
    auto b1 = tiny_block(1, 4, 27);
    DT original = b1.opacities.detach();
    auto b2 = tiny_block(2, 16, 28);
    auto b3 = tiny_block(3, 64, 29);
    DT xi12 = DT::rand_uniform({1, 2, 2}, rng, 0.2, 0.9);
    auto fused2 = fuse<double>({b1, b2}, {xi12});
    DT xi13 = DT::rand_uniform({1, 2, 2}, rng, 0.2, 0.9);
    DT xi23 = DT::rand_uniform({1, 4, 4}, rng, 0.2, 0.9);
    auto fused3 = fuse<double>({fused2.stages[0], fused2.stages[1], b3}, {xi13, xi23});
    for (int64_t i = 0; i < 4; ++i)
        EXPECT_NEAR(fused3.stages[0].opacities.ptr()[i],
                    original.ptr()[i] * xi12.ptr()[i] * xi13.ptr()[i], 1e-12);
}

TEST(Fuse, RejectsResolutionMismatch) {
    auto b1 = tiny_block(1, 4, 30);
    auto b2 = tiny_block(2, 16, 31);
    DT bad = DT::full({1, 3, 3}, 1.0);
    EXPECT_THROW(fuse<double>({b1, b2}, {bad}), Error);
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
}
