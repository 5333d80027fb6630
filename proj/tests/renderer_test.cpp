// SPDX-License-Identifier: Apache-2.0

#include "hgs/renderer.hpp"
#include "hgs/renderer_reference.hpp"
#include "hgs/gradcheck.hpp"

#include <gtest/gtest.h>

using namespace hgs;
using DT = Tensor<double>;

namespace {

Intrinsics make_intr(double f, int64_t w, int64_t h) {
    return {f, f, double(w) / 2.0, double(h) / 2.0, w, h};
}

/// One stage block with m primitives drawn inside the view frustum.
template <class T>
StageGaussians<T> random_block(int64_t m, uint64_t seed, int sh_degree = 1, int stage = 1,
                               double opacity_lo = 0.2, double opacity_hi = 0.95) {
    Rng rng(seed);
    StageGaussians<T> b;
    b.stage = stage;
    b.sh_degree = sh_degree;
    std::vector<T> centers, scales, rots, ops, shs;
    int coeffs = sh_coeff_count(sh_degree);
    for (int64_t i = 0; i < m; ++i) {
        centers.push_back(T(rng.uniform(-0.8, 0.8)));
        centers.push_back(T(rng.uniform(-0.6, 0.6)));
        centers.push_back(T(rng.uniform(1.2, 4.0)));
        for (int k = 0; k < 3; ++k) scales.push_back(T(rng.uniform(0.02, 0.15)));
        double q[4];
        double nq = 0;
        for (int k = 0; k < 4; ++k) {
            q[k] = rng.normal();
            nq += q[k] * q[k];
        }
        nq = std::sqrt(nq);
        for (int k = 0; k < 4; ++k) rots.push_back(T(q[k] / nq));
        ops.push_back(T(rng.uniform(opacity_lo, opacity_hi)));
        for (int k = 0; k < coeffs * 3; ++k)
            shs.push_back(T(rng.uniform(-0.25, 0.25))); // keeps colors off the clamp
    }
    b.centers = Tensor<T>::from_data({m, 3}, std::move(centers));
    b.scales = Tensor<T>::from_data({m, 3}, std::move(scales));
    b.rotations = Tensor<T>::from_data({m, 4}, std::move(rots));
    b.opacities = Tensor<T>::from_data({m}, std::move(ops));
    b.sh = Tensor<T>::from_data({m, coeffs * 3}, std::move(shs));
    return b;
}

} // namespace

TEST(ProjectGaussian, IsotropicOnAxisClosedForm) {
    const double s = 0.05, d = 2.0, fx = 40.0;
    Intrinsics intr = make_intr(fx, 32, 32);
    double quat[4] = {1, 0, 0, 0};
    double sh[12] = {0};
    splat::Projected out;
    RenderConfig cfg;
    ASSERT_TRUE(splat::project_gaussian_impl({0, 0, d}, {s, s, s}, quat, 0.8, sh, 1, intr,
                                             Pose::identity(), cfg, out));
    const double expect = (fx * s / d) * (fx * s / d) + 0.3;
    EXPECT_NEAR(out.cov_a, expect, 1e-9);
    EXPECT_NEAR(out.cov_c, expect, 1e-9);
    EXPECT_NEAR(out.cov_b, 0.0, 1e-9);
    EXPECT_NEAR(out.mean_u, intr.cx, 1e-12);
    EXPECT_NEAR(out.mean_v, intr.cy, 1e-12);
}

TEST(ProjectGaussian, BehindCameraIsCulled) {
    Intrinsics intr = make_intr(40, 32, 32);
    double quat[4] = {1, 0, 0, 0};
    double sh[12] = {0};
    splat::Projected out;
    EXPECT_FALSE(splat::project_gaussian_impl({0, 0, -1.0}, {0.1, 0.1, 0.1}, quat, 0.8, sh, 1,
                                              intr, Pose::identity(), RenderConfig{}, out));
}

TEST(ProjectGaussian, JacobianMatchesProjectionFiniteDifferences) {
    Intrinsics intr = make_intr(37, 48, 40);
    Pose pose = Pose::from_rt(Mat3{}, {0.1, -0.2, 0.05});
    Vec3 p{0.3, -0.2, 2.2};
    Vec3 t = pose.to_camera(p);
    double j[2][3] = {{intr.fx / t.z, 0, -intr.fx * t.x / (t.z * t.z)},
                      {0, intr.fy / t.z, -intr.fy * t.y / (t.z * t.z)}};
    const double h = 1e-6;
    for (int ax = 0; ax < 3; ++ax) {
        Vec3 tu = t, td = t;
        (&tu.x)[ax] += h;
        (&td.x)[ax] -= h;
        auto pr = [&](const Vec3& c) {
            return std::pair<double, double>{intr.fx * c.x / c.z + intr.cx,
                                             intr.fy * c.y / c.z + intr.cy};
        };
        auto [uu, vu] = pr(tu);
        auto [ud, vd] = pr(td);
        EXPECT_NEAR((uu - ud) / (2 * h), j[0][ax], 1e-5 * std::max(1.0, std::fabs(j[0][ax])));
        EXPECT_NEAR((vu - vd) / (2 * h), j[1][ax], 1e-5 * std::max(1.0, std::fabs(j[1][ax])));
    }
}

TEST(Render, EmptySetGivesBackground) {
    GaussianSet<double> set;
    Intrinsics intr = make_intr(30, 16, 12);
    auto out = render(set, intr, Pose::identity(), {0.2, 0.4, 0.6});
    for (int64_t p = 0; p < 16 * 12; ++p) {
        EXPECT_DOUBLE_EQ(out.color.ptr()[p * 3 + 0], 0.2);
        EXPECT_DOUBLE_EQ(out.color.ptr()[p * 3 + 1], 0.4);
        EXPECT_DOUBLE_EQ(out.color.ptr()[p * 3 + 2], 0.6);
        EXPECT_DOUBLE_EQ(out.alpha.ptr()[p], 0.0);
        EXPECT_EQ(out.contributors[size_t(p)], 0);
    }
}

TEST(Render, SingleGaussianAlphaPeakAndRadialFalloff) {
    // Isotropic primitive centered exactly on a pixel center.
    const int64_t w = 17, h = 17;
    Intrinsics intr{20, 20, 8.5, 8.5, w, h}; // principal point = center of pixel (8,8)
    const double s = 0.12, d = 2.0, opacity = 0.9;
    StageGaussians<double> b;
    b.stage = 1;
    b.sh_degree = 0;
    b.centers = DT::from_data({1, 3}, {0, 0, d});
    b.scales = DT::from_data({1, 3}, {s, s, s});
    b.rotations = DT::from_data({1, 4}, {1, 0, 0, 0});
    b.opacities = DT::from_data({1}, {opacity});
    b.sh = DT::from_data({1, 3}, {0.1, 0.2, 0.3});
    GaussianSet<double> set;
    set.stages.push_back(b);
    auto out = render(set, intr, Pose::identity());
    EXPECT_NEAR(out.alpha.at({8, 8}), opacity, 1e-12); // g(0) = 1 at the peak

    const double var = (intr.fx * s / d) * (intr.fx * s / d) + 0.3;
    for (int64_t px : {6, 7, 9, 11}) {
        double dx = double(px) - 8.0;
        double expect = opacity * std::exp(-0.5 * dx * dx / var);
        if (expect < 1.0 / 255.0) expect = 0.0;
        EXPECT_NEAR(out.alpha.at({8, px}), expect, 1e-12) << "px=" << px;
    }
}

TEST(Render, TiledMatchesBruteForceOracle) {
    GaussianSet<double> set;
    set.stages.push_back(random_block<double>(100, 77));
    Intrinsics intr = make_intr(70, 64, 64);
    Pose pose = Pose::identity();
    auto out = render(set, intr, pose, {0.1, 0.1, 0.3});
    auto ref = render_reference(set, intr, pose, {0.1, 0.1, 0.3});
    double max_abs = 0;
    for (int64_t i = 0; i < out.color.numel(); ++i)
        max_abs = std::max(max_abs, std::fabs(out.color.ptr()[i] - ref.ptr()[i]));
    EXPECT_LT(max_abs, 1e-5);
}

TEST(Render, CompositingConservation) {
    GaussianSet<double> set;
    set.stages.push_back(random_block<double>(40, 91));
    Intrinsics intr = make_intr(50, 32, 32);
    auto out = render(set, intr, Pose::identity());
    // Direct evaluation of alpha = 1 - prod(1 - a_i) with the same
    // projection math, independent loop.
    splat::RenderState<double> st;
    st.intr = intr;
    st.pose = Pose::identity();
    st.cfg = RenderConfig{};
    st.background = {0, 0, 0};
    st.blocks = set.stages;
    splat::project_and_bin(st);
    Rng rng(5);
    for (int trial = 0; trial < 64; ++trial) {
        int64_t px = int64_t(rng.uniform(0, 32)), py = int64_t(rng.uniform(0, 32));
        double cx = double(px) + 0.5, cy = double(py) + 0.5;
        double prod = 1.0;
        for (const auto& g : st.gaussians) {
            double dx = cx - g.mean_u, dy = cy - g.mean_v;
            double q = g.inv_a * dx * dx + 2 * g.inv_b * dx * dy + g.inv_c * dy * dy;
            double a = g.opacity * std::exp(-0.5 * q);
            if (a < st.cfg.alpha_skip) continue;
            prod *= 1.0 - a;
            if (prod < st.cfg.t_floor) break;
        }
        EXPECT_NEAR(out.alpha.at({py, px}), 1.0 - prod, 1e-9);
    }
}

TEST(Render, DepthSortDeterminismAcrossRuns) {
    GaussianSet<float> set;
    set.stages.push_back(random_block<float>(60, 13));
    // Force exact depth ties to exercise the stable tie-break.
    for (int i = 0; i < 10; ++i)
        set.stages[0].centers.storage()[size_t(i * 3 + 2)] = 2.0f;
    Intrinsics intr = make_intr(40, 48, 48);
    auto a = render(set, intr, Pose::identity());
    auto b = render(set, intr, Pose::identity());
    for (int64_t i = 0; i < a.color.numel(); ++i)
        ASSERT_EQ(a.color.ptr()[i], b.color.ptr()[i]);
}

TEST(RenderBackward, ZeroUpstreamGivesZeroGrads) {
    GaussianSet<double> set;
    set.stages.push_back(random_block<double>(10, 21));
    for (auto& blk : set.stages) {
        blk.centers.set_requires_grad(true);
        blk.opacities.set_requires_grad(true);
    }
    Intrinsics intr = make_intr(30, 16, 16);
    render_backward(set, intr, Pose::identity(), DT::zeros({16, 16, 3}));
    if (set.stages[0].centers.has_grad())
        for (double g : set.stages[0].centers.grad()) EXPECT_EQ(g, 0.0);
}

TEST(RenderBackward, SinglePrimitiveMatchesFiniteDifferences) {
    auto block = random_block<double>(1, 55, 1, 1, 0.6, 0.8);
    Intrinsics intr = make_intr(20, 12, 12);
    Pose pose = Pose::identity();
    auto rep = check_gradients(
        {block.centers, block.scales, block.rotations, block.opacities, block.sh},
        [&](const std::vector<DT>& in) {
            GaussianSet<double> set;
            StageGaussians<double> b;
            b.stage = 1;
            b.sh_degree = 1;
            b.centers = in[0];
            b.scales = in[1];
            b.rotations = in[2];
            b.opacities = in[3];
            b.sh = in[4];
            set.stages.push_back(b);
            auto out = render(set, intr, pose, {0.2, 0.1, 0.4});
            return sum_all(out.color);
        },
        1e-5);
    EXPECT_LT(rep.max_rel, 1e-3) << rep.worst_site;
}

TEST(RenderBackward, MultiPrimitiveOcclusionGradients) {
    auto block = random_block<double>(6, 66, 1, 1, 0.4, 0.9);
    Intrinsics intr = make_intr(18, 10, 10);
    Pose pose = Pose::from_rt(Mat3{}, {0.05, -0.02, 0.0});
    Rng wrng(7);
    DT wmap = DT::rand_uniform({10, 10, 3}, wrng, -1.0, 1.0);
    auto rep = check_gradients(
        {block.centers, block.scales, block.rotations, block.opacities, block.sh},
        [&](const std::vector<DT>& in) {
            GaussianSet<double> set;
            StageGaussians<double> b;
            b.stage = 1;
            b.sh_degree = 1;
            b.centers = in[0];
            b.scales = in[1];
            b.rotations = in[2];
            b.opacities = in[3];
            b.sh = in[4];
            set.stages.push_back(b);
            auto out = render(set, intr, pose, {0.3, 0.3, 0.3});
            return sum_all(mul(out.color, wmap));
        },
        1e-5);
    EXPECT_LT(rep.max_rel, 1e-3) << rep.worst_site;
}

TEST(RenderBackward, TransparentPrimitiveGetsNoCenterGradient) {
    auto block = random_block<double>(1, 58);
    block.opacities.storage()[0] = 0.002; // below the 1/255 skip threshold
    block.centers.set_requires_grad(true);
    GaussianSet<double> set;
    set.stages.push_back(block);
    Intrinsics intr = make_intr(20, 12, 12);
    render_backward(set, intr, Pose::identity(), DT::full({12, 12, 3}, 1.0));
    double norm = 0;
    if (set.stages[0].centers.has_grad())
        for (double g : set.stages[0].centers.grad()) norm += g * g;
    EXPECT_EQ(norm, 0.0);
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
}
