// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/camera.hpp"
#include "hgs/io/image.hpp"

#include <json.hpp>

namespace hgs::io {

enum class ViewRole { Input, Target };

inline const char* role_name(ViewRole r) { return r == ViewRole::Input ? "input" : "target"; }

struct SceneView {
    std::string image_path; // relative to the scene root
    Intrinsics intrinsics;
    Pose pose;
    ViewRole role = ViewRole::Input;
    Tensor<float> image;      // [H,W,3] in [0,1]
    Tensor<float> gt_depth;   // [H,W], optional (synthetic scenes)
};

struct Scene {
    std::filesystem::path root;
    double near = 0, far = 0;
    std::vector<SceneView> views;

    std::vector<const SceneView*> inputs() const { return with_role(ViewRole::Input); }
    std::vector<const SceneView*> targets() const { return with_role(ViewRole::Target); }

private:
    std::vector<const SceneView*> with_role(ViewRole r) const {
        std::vector<const SceneView*> out;
        for (const auto& v : views)
            if (v.role == r) out.push_back(&v);
        return out;
    }
};

/// Writes cameras.json for a set of views (images must already be on disk).
inline void save_cameras_json(const std::filesystem::path& dir, double near, double far,
                              const std::vector<SceneView>& views) {
    nlohmann::ordered_json j;
    j["near"] = near;
    j["far"] = far;
    j["views"] = nlohmann::ordered_json::array();
    for (const auto& v : views) {
        nlohmann::ordered_json e;
        e["image"] = v.image_path;
        e["width"] = v.intrinsics.width;
        e["height"] = v.intrinsics.height;
        e["fx"] = v.intrinsics.fx;
        e["fy"] = v.intrinsics.fy;
        e["cx"] = v.intrinsics.cx;
        e["cy"] = v.intrinsics.cy;
        e["world_to_cam"] = v.pose.matrix();
        e["role"] = role_name(v.role);
        j["views"].push_back(e);
    }
    std::ofstream f(dir / "cameras.json");
    check(f.good(), "cannot write ", (dir / "cameras.json").string());
    f << j.dump(2) << "\n";
}

/// Loads a scene directory: cameras.json + referenced images (+ optional
/// depth/<name>.rawf ground truth). Poses within 1e-6 of SO(3) are
/// re-orthonormalized; anything worse (or mirrored) is rejected.
inline Scene load_scene(const std::filesystem::path& dir) {
    auto json_path = dir / "cameras.json";
    check(std::filesystem::exists(json_path), "scene: missing ", json_path.string());
    std::ifstream f(json_path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw Error(cat("scene: malformed JSON in ", json_path.string(), ": ", e.what()));
    }
    Scene scene;
    scene.root = dir;
    check(j.contains("near") && j.contains("far"), "scene: cameras.json needs near/far bounds");
    scene.near = j["near"].get<double>();
    scene.far = j["far"].get<double>();
    check(scene.near > 0 && scene.near < scene.far, "scene: invalid near/far: ", scene.near, ", ",
          scene.far);
    check(j.contains("views") && j["views"].is_array(), "scene: cameras.json needs a views array");

    for (const auto& e : j["views"]) {
        SceneView v;
        v.image_path = e.at("image").get<std::string>();
        v.intrinsics.fx = e.at("fx").get<double>();
        v.intrinsics.fy = e.at("fy").get<double>();
        v.intrinsics.cx = e.at("cx").get<double>();
        v.intrinsics.cy = e.at("cy").get<double>();
        v.intrinsics.width = e.at("width").get<int64_t>();
        v.intrinsics.height = e.at("height").get<int64_t>();
        v.intrinsics.validate();

        auto m = e.at("world_to_cam").get<std::vector<double>>();
        check(m.size() == 16, "scene: world_to_cam must have 16 entries for ", v.image_path);
        std::array<double, 16> mat;
        std::copy(m.begin(), m.end(), mat.begin());
        Mat3 r;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) r(a, b) = mat[size_t(a * 4 + b)];
        double err = r.orthonormality_error();
        check(err <= 1e-6, "scene: pose of ", v.image_path,
              " is not rigid (orthonormality error ", err, ")");
        check(r.det() > 0, "scene: pose of ", v.image_path,
              " has determinant ", r.det(), "; mirrored poses are rejected");
        if (err > 1e-9) r = r.orthonormalized();
        v.pose = Pose::from_rt(r, {mat[3], mat[7], mat[11]});

        std::string role = e.at("role").get<std::string>();
        check(role == "input" || role == "target", "scene: unknown role '", role, "'");
        v.role = role == "input" ? ViewRole::Input : ViewRole::Target;

        auto img_path = dir / v.image_path;
        check(std::filesystem::exists(img_path), "scene: missing image ", img_path.string());
        v.image = read_png<float>(img_path);
        check(v.image.shape()[0] == v.intrinsics.height && v.image.shape()[1] == v.intrinsics.width,
              "scene: ", v.image_path, " is ", shape_str(v.image.shape()),
              " but cameras.json declares ", v.intrinsics.width, "x", v.intrinsics.height);

        auto depth_path = dir / "depth" /
                          (std::filesystem::path(v.image_path).stem().string() + ".rawf");
        if (std::filesystem::exists(depth_path)) v.gt_depth = read_rawf<float>(depth_path);
        scene.views.push_back(std::move(v));
    }
    check(scene.inputs().size() >= 2, "scene: needs at least 2 input views, got ",
          scene.inputs().size());
    check(!scene.targets().empty(), "scene: needs at least 1 target view");
    return scene;
}

} // namespace hgs::io
