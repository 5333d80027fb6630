// SPDX-License-Identifier: Apache-2.0

#include "hgs/io/config.hpp"
#include "hgs/io/ply.hpp"
#include "hgs/io/scene.hpp"
#include "hgs/io/synth.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace hgs;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / "hgs_io_test" / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

std::vector<uint8_t> file_bytes(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

} // namespace

TEST(Png, RoundTripQuantized) {
    auto dir = temp_dir("png");
    Rng rng(1);
    Tensor<float> img = Tensor<float>::rand_uniform({9, 13, 3}, rng);
    io::write_png(dir / "a.png", img);
    Tensor<float> back = io::read_png<float>(dir / "a.png");
    ASSERT_EQ(back.shape(), img.shape());
    for (int64_t i = 0; i < img.numel(); ++i)
        EXPECT_NEAR(back.ptr()[i], img.ptr()[i], 0.5 / 255.0 + 1e-6);
    // 8-bit payloads survive a second cycle exactly.
    io::write_png(dir / "b.png", back);
    Tensor<float> again = io::read_png<float>(dir / "b.png");
    for (int64_t i = 0; i < back.numel(); ++i) EXPECT_EQ(again.ptr()[i], back.ptr()[i]);
}

TEST(Rawf, RoundTripIsExact) {
    auto dir = temp_dir("rawf");
    Rng rng(2);
    Tensor<float> img = Tensor<float>::rand_uniform({7, 5, 3}, rng, -4.0, 9.0);
    io::write_rawf(dir / "x.rawf", img);
    Tensor<float> back = io::read_rawf<float>(dir / "x.rawf");
    ASSERT_EQ(back.shape(), img.shape());
    for (int64_t i = 0; i < img.numel(); ++i) EXPECT_EQ(back.ptr()[i], img.ptr()[i]);

    Tensor<float> depth = Tensor<float>::rand_uniform({6, 6}, rng, 0.5, 5.0);
    io::write_rawf(dir / "d.rawf", depth);
    Tensor<float> dback = io::read_rawf<float>(dir / "d.rawf");
    ASSERT_EQ(dback.shape(), depth.shape());
    for (int64_t i = 0; i < depth.numel(); ++i) EXPECT_EQ(dback.ptr()[i], depth.ptr()[i]);
}

TEST(Config, ParseTypedAndOverride) {
    auto cfg = io::KvConfig::parse("iters = 500\nlr = 2e-4 # comment\nflip_augment = true\n\n"
                                   "# full-line comment\nname = cube\n");
    EXPECT_EQ(cfg.get_int("iters", 0), 500);
    EXPECT_DOUBLE_EQ(cfg.get_double("lr", 0), 2e-4);
    EXPECT_TRUE(cfg.get_bool("flip_augment", false));
    EXPECT_EQ(cfg.get_string("name", ""), "cube");
    EXPECT_EQ(cfg.get_int("missing", 7), 7);
    cfg.set("iters=900");
    EXPECT_EQ(cfg.get_int("iters", 0), 900);
    EXPECT_THROW(cfg.get_int("name", 0), Error);
    EXPECT_THROW(io::KvConfig::parse("not a kv line\n"), Error);
}

TEST(Scene, SynthLoadRoundTrip) {
    auto dir = temp_dir("plane");
    io::synth_scene(dir, io::SynthKind::TexturedPlane, 11, 32);
    io::Scene scene = io::load_scene(dir);
    EXPECT_EQ(scene.views.size(), 5u);
    EXPECT_EQ(scene.inputs().size(), 2u);
    EXPECT_EQ(scene.targets().size(), 3u);
    EXPECT_DOUBLE_EQ(scene.near, 1.2);
    for (const auto& v : scene.views) {
        EXPECT_EQ(v.image.shape(), (Shape{32, 32, 3}));
        ASSERT_TRUE(v.gt_depth.defined());
    }
    // Plane scene: ground-truth depth is exactly the plane distance.
    for (const auto& v : scene.views)
        for (int64_t i = 0; i < v.gt_depth.numel(); ++i)
            EXPECT_FLOAT_EQ(v.gt_depth.ptr()[i], 2.0f);
}

TEST(Scene, IntrinsicsRoundTripBitExact) {
    auto dir = temp_dir("roundtrip");
    io::synth_scene(dir, io::SynthKind::TexturedPlane, 3, 16);
    io::Scene a = io::load_scene(dir);
    // Re-save the cameras file from the loaded scene and reload.
    io::save_cameras_json(dir, a.near, a.far, a.views);
    io::Scene b = io::load_scene(dir);
    for (size_t i = 0; i < a.views.size(); ++i) {
        EXPECT_EQ(a.views[i].intrinsics.fx, b.views[i].intrinsics.fx);
        EXPECT_EQ(a.views[i].intrinsics.fy, b.views[i].intrinsics.fy);
        EXPECT_EQ(a.views[i].intrinsics.cx, b.views[i].intrinsics.cx);
        EXPECT_EQ(a.views[i].intrinsics.cy, b.views[i].intrinsics.cy);
        auto ma = a.views[i].pose.matrix(), mb = b.views[i].pose.matrix();
        for (int k = 0; k < 16; ++k) EXPECT_EQ(ma[size_t(k)], mb[size_t(k)]);
    }
}

TEST(Scene, RejectsMirroredPose) {
    auto dir = temp_dir("mirror");
    io::synth_scene(dir, io::SynthKind::TexturedPlane, 5, 16);
    // Corrupt one pose into a mirror (determinant -1).
    auto path = dir / "cameras.json";
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    in.close();
    j["views"][0]["world_to_cam"][0] = -1.0;
    std::ofstream out(path);
    out << j.dump(2);
    out.close();
    EXPECT_THROW(io::load_scene(dir), Error);
}

TEST(Scene, RejectsMissingPieces) {
    auto dir = temp_dir("missing");
    EXPECT_THROW(io::load_scene(dir), Error);
    io::synth_scene(dir, io::SynthKind::TexturedPlane, 5, 16);
    std::filesystem::remove(dir / "images/view_000.png");
    EXPECT_THROW(io::load_scene(dir), Error);
}

TEST(Scene, SameSeedIsByteIdentical) {
    auto d1 = temp_dir("det1");
    auto d2 = temp_dir("det2");
    io::synth_scene(d1, io::SynthKind::TexturedCube, 42, 32);
    io::synth_scene(d2, io::SynthKind::TexturedCube, 42, 32);
    for (const auto& rel :
         {"cameras.json", "images/view_000.png", "images/view_004.png", "depth/view_001.rawf"})
        EXPECT_EQ(file_bytes(d1 / rel), file_bytes(d2 / rel)) << rel;
    auto d3 = temp_dir("det3");
    io::synth_scene(d3, io::SynthKind::TexturedCube, 43, 32);
    EXPECT_NE(file_bytes(d1 / "images/view_000.png"), file_bytes(d3 / "images/view_000.png"));
}

TEST(Scene, TwoPlaneDepthIsBimodal) {
    auto dir = temp_dir("twoplane");
    io::synth_scene(dir, io::SynthKind::TwoPlane, 9, 32);
    io::Scene scene = io::load_scene(dir);
    int64_t near_count = 0, far_count = 0;
    for (int64_t i = 0; i < scene.views[0].gt_depth.numel(); ++i) {
        float d = scene.views[0].gt_depth.ptr()[i];
        if (std::fabs(d - 2.0f) < 1e-5f)
            ++near_count;
        else if (std::fabs(d - 3.3f) < 1e-5f)
            ++far_count;
        else
            FAIL() << "unexpected depth " << d;
    }
    EXPECT_GT(near_count, 50);
    EXPECT_GT(far_count, 50);
}

TEST(Scene, WarpAtTrueDepthReproducesOtherView) {
    // Lambertian check: warping view 1's image to view 0 through the true
    // plane depth reproduces view 0 up to interpolation error.
    auto dir = temp_dir("lambert");
    io::synth_scene(dir, io::SynthKind::TexturedPlane, 21, 48);
    io::Scene scene = io::load_scene(dir);
    const auto& v0 = *scene.inputs()[0];
    const auto& v1 = *scene.inputs()[1];
    Tensor<float> warped =
        plane_sweep_warp(v1.image, v0.pose, v1.pose, v0.intrinsics, v1.intrinsics, 2.0);
    // Covisible region: skip the disparity-width border.
    int64_t margin = int64_t(std::ceil(v0.intrinsics.fx * 0.3 / 2.0)) + 1;
    double acc = 0;
    int64_t count = 0;
    for (int64_t y = 1; y < 47; ++y)
        for (int64_t x = margin; x < 48 - margin; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                acc += std::fabs(double(warped.at({y, x, c})) - double(v0.image.at({y, x, c})));
                ++count;
            }
    EXPECT_LT(acc / double(count), 0.02);
}

namespace {

StageGaussians<float> ply_block(int64_t m, uint64_t seed, int deg) {
    Rng rng(seed);
    StageGaussians<float> b;
    b.stage = 1;
    b.sh_degree = deg;
    b.centers = Tensor<float>::rand_uniform({m, 3}, rng, -1.0, 1.0);
    b.scales = Tensor<float>::rand_uniform({m, 3}, rng, 0.01, 0.2);
    b.rotations = Tensor<float>::zeros({m, 4});
    for (int64_t i = 0; i < m; ++i) {
        double q[4], n = 0;
        for (auto& x : q) {
            x = rng.normal();
            n += x * x;
        }
        n = std::sqrt(n);
        for (int k = 0; k < 4; ++k) b.rotations.storage()[size_t(i * 4 + k)] = float(q[k] / n);
    }
    b.opacities = Tensor<float>::rand_uniform({m}, rng, 0.05, 0.95);
    b.sh = Tensor<float>::rand_uniform({m, 3 * sh_coeff_count(deg)}, rng, -0.5, 0.5);
    return b;
}

} // namespace

TEST(Ply, HeaderLayoutMatchesCommunityConvention) {
    auto dir = temp_dir("ply_header");
    GaussianSet<float> set;
    set.stages.push_back(ply_block(5, 31, 1));
    io::export_ply(set, dir / "g.ply", 0.0);
    std::ifstream f(dir / "g.ply");
    std::string header, line;
    while (std::getline(f, line) && line != "end_header") header += line + "\n";
    EXPECT_NE(header.find("element vertex 5"), std::string::npos);
    const char* expected[] = {"x",  "y",  "z",  "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
                              "f_rest_0", "f_rest_8", "opacity", "scale_0", "scale_2", "rot_0",
                              "rot_3"};
    size_t last = 0;
    for (const char* name : expected) {
        size_t pos = header.find(cat("property float ", name, "\n"));
        EXPECT_NE(pos, std::string::npos) << name;
        EXPECT_GE(pos, last) << name << " out of order";
        last = pos;
    }
    // degree 1 -> 9 f_rest properties
    EXPECT_NE(header.find("f_rest_8"), std::string::npos);
    EXPECT_EQ(header.find("f_rest_9"), std::string::npos);
}

TEST(Ply, ExportImportRoundTrip) {
    auto dir = temp_dir("ply_rt");
    GaussianSet<float> set;
    set.stages.push_back(ply_block(64, 33, 1));
    io::export_ply(set, dir / "g.ply", 0.0);
    auto back = io::import_ply(dir / "g.ply");
    ASSERT_EQ(back.count(), 64);
    const auto& src = set.stages[0];
    for (int64_t i = 0; i < 64; ++i) {
        for (int k = 0; k < 3; ++k) {
            EXPECT_FLOAT_EQ(back.centers.at({i, k}), src.centers.at({i, k}));
            EXPECT_NEAR(back.scales.at({i, k}), src.scales.at({i, k}),
                        2e-6 * src.scales.at({i, k}) + 1e-9);
        }
        for (int k = 0; k < 4; ++k)
            EXPECT_FLOAT_EQ(back.rotations.at({i, k}), src.rotations.at({i, k}));
        EXPECT_NEAR(back.opacities.at({i}), src.opacities.at({i}), 2e-6);
        for (int k = 0; k < 12; ++k) EXPECT_FLOAT_EQ(back.sh.at({i, k}), src.sh.at({i, k}));
    }
}

TEST(Ply, ThresholdDropsLowOpacity) {
    auto dir = temp_dir("ply_thresh");
    GaussianSet<float> set;
    set.stages.push_back(ply_block(50, 35, 0));
    io::export_ply(set, dir / "all.ply", 0.0);
    EXPECT_EQ(io::import_ply(dir / "all.ply").count(), 50);
    io::export_ply(set, dir / "cut.ply", 0.5);
    int64_t expect = 0;
    for (int64_t i = 0; i < 50; ++i)
        if (set.stages[0].opacities.at({i}) >= 0.5f) ++expect;
    EXPECT_EQ(io::import_ply(dir / "cut.ply").count(), expect);
    EXPECT_LT(expect, 50);
}

TEST(Ply, DeterministicBytes) {
    auto dir = temp_dir("ply_det");
    GaussianSet<float> set;
    set.stages.push_back(ply_block(20, 36, 1));
    io::export_ply(set, dir / "a.ply", 0.0);
    io::export_ply(set, dir / "b.ply", 0.0);
    EXPECT_EQ(file_bytes(dir / "a.ply"), file_bytes(dir / "b.ply"));
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
}
