// SPDX-License-Identifier: Apache-2.0
#pragma once

// Procedurally textured synthetic scenes rendered by an exact ray-based
// rasterizer (independent of the splatting renderer), with ground-truth
// depth stored next to the images.

#include "hgs/io/scene.hpp"

namespace hgs::io {

enum class SynthKind { TexturedPlane, TexturedCube, TwoPlane };

inline SynthKind synth_kind_from_string(const std::string& s) {
    if (s == "textured-plane") return SynthKind::TexturedPlane;
    if (s == "textured-cube") return SynthKind::TexturedCube;
    if (s == "two-plane") return SynthKind::TwoPlane;
    throw Error(cat("unknown scene kind '", s,
                    "' (expected textured-plane, textured-cube or two-plane)"));
}

/// Smooth band-limited random-Fourier texture; exact at any real coordinate.
class ProceduralTexture {
public:
    ProceduralTexture(uint64_t seed, int waves = 12, double max_freq = 9.0) {
        Rng rng(seed);
        for (int ch = 0; ch < 3; ++ch)
            for (int k = 0; k < waves; ++k) {
                Wave w;
                double f = rng.uniform(1.5, max_freq);
                double ang = rng.uniform(0, 6.283185307179586);
                w.fx = f * std::cos(ang);
                w.fy = f * std::sin(ang);
                w.phase = rng.uniform(0, 6.283185307179586);
                w.amp = rng.uniform(0.05, 0.16) * (k < 4 ? 1.6 : 0.7);
                waves_[ch].push_back(w);
            }
    }

    void rgb(double u, double v, double out[3]) const {
        for (int ch = 0; ch < 3; ++ch) {
            double acc = 0.5;
            for (const Wave& w : waves_[ch]) acc += w.amp * std::sin(w.fx * u + w.fy * v + w.phase);
            out[ch] = std::clamp(acc, 0.02, 0.98);
        }
    }

private:
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves_[3];
};

namespace detail {

struct RayHit {
    bool hit = false;
    double depth = 0; // camera-frame z
    double color[3] = {0, 0, 0};
};

struct SynthGeometry {
    SynthKind kind;
    ProceduralTexture tex_a, tex_b;

    SynthGeometry(SynthKind k, uint64_t seed)
        : kind(k), tex_a(seed * 2654435761u + 1), tex_b(seed * 2654435761u + 2) {}

    // Rays from identity-rotation cameras: origin o, direction (dx, dy, 1).
    RayHit trace(const Vec3& o, double dx, double dy) const {
        RayHit r;
        switch (kind) {
        case SynthKind::TexturedPlane: {
            const double zp = 2.0;
            double t = (zp - o.z);
            r.hit = true;
            r.depth = t;
            tex_a.rgb(o.x + dx * t, o.y + dy * t, r.color);
            return r;
        }
        case SynthKind::TwoPlane: {
            const double z_fg = 2.0, z_bg = 3.3, half = 0.4;
            double t = z_fg - o.z;
            double hx = o.x + dx * t, hy = o.y + dy * t;
            if (std::fabs(hx) <= half && std::fabs(hy) <= half) {
                r.hit = true;
                r.depth = t;
                tex_a.rgb(hx * 2.0, hy * 2.0, r.color);
                return r;
            }
            t = z_bg - o.z;
            r.hit = true;
            r.depth = t;
            tex_b.rgb(o.x + dx * t, o.y + dy * t, r.color);
            return r;
        }
        case SynthKind::TexturedCube: {
            const Vec3 center{0, 0, 2.4};
            const double half = 0.55, z_bg = 3.6;
            // Slab intersection with the axis-aligned cube.
            double t_near = -1e30, t_far = 1e30;
            double od[3] = {o.x - center.x, o.y - center.y, o.z - center.z};
            double dir[3] = {dx, dy, 1.0};
            bool miss = false;
            for (int ax = 0; ax < 3; ++ax) {
                if (std::fabs(dir[ax]) < 1e-12) {
                    if (std::fabs(od[ax]) > half) miss = true;
                    continue;
                }
                double t0 = (-half - od[ax]) / dir[ax];
                double t1 = (half - od[ax]) / dir[ax];
                if (t0 > t1) std::swap(t0, t1);
                t_near = std::max(t_near, t0);
                t_far = std::min(t_far, t1);
            }
            if (!miss && t_near <= t_far && t_near > 0) {
                r.hit = true;
                r.depth = t_near; // dir.z == 1, so ray parameter equals camera z
                double hx = od[0] + dx * t_near, hy = od[1] + dy * t_near,
                       hz = od[2] + t_near;
                // Face-local texture coordinates with a per-face offset.
                double u, v;
                int face;
                double ax_ = std::fabs(hx), ay_ = std::fabs(hy), az_ = std::fabs(hz);
                if (az_ >= ax_ && az_ >= ay_) {
                    face = hz < 0 ? 0 : 1;
                    u = hx;
                    v = hy;
                } else if (ax_ >= ay_) {
                    face = hx < 0 ? 2 : 3;
                    u = hz;
                    v = hy;
                } else {
                    face = hy < 0 ? 4 : 5;
                    u = hx;
                    v = hz;
                }
                tex_a.rgb(u * 3.0 + face * 2.7, v * 3.0 - face * 1.3, r.color);
                return r;
            }
            double t = z_bg - o.z;
            r.hit = true;
            r.depth = t;
            tex_b.rgb(o.x + dx * t, o.y + dy * t, r.color);
            return r;
        }
        }
        return r;
    }
};

inline SceneView render_synth_view(const SynthGeometry& geo, const Intrinsics& intr,
                                   const Vec3& cam_pos, ViewRole role,
                                   const std::string& image_path) {
    SceneView v;
    v.image_path = image_path;
    v.intrinsics = intr;
    v.pose = Pose::from_rt(Mat3{}, cam_pos * -1.0); // world_to_cam for identity rotation
    v.role = role;
    v.image = Tensor<float>::zeros({intr.height, intr.width, 3});
    v.gt_depth = Tensor<float>::zeros({intr.height, intr.width});
    for (int64_t py = 0; py < intr.height; ++py)
        for (int64_t px = 0; px < intr.width; ++px) {
            double dx = (double(px) + 0.5 - intr.cx) / intr.fx;
            double dy = (double(py) + 0.5 - intr.cy) / intr.fy;
            RayHit hit = geo.trace(cam_pos, dx, dy);
            int64_t i = py * intr.width + px;
            for (int ch = 0; ch < 3; ++ch) v.image.storage()[size_t(i * 3 + ch)] = float(hit.color[ch]);
            v.gt_depth.storage()[size_t(i)] = float(hit.depth);
        }
    return v;
}

} // namespace detail

/// Generates a synthetic scene on disk: images/, depth/ and cameras.json.
/// Deterministic: the same kind/seed/size produce byte-identical files.
inline void synth_scene(const std::filesystem::path& dir, SynthKind kind, uint64_t seed,
                        int64_t size = 64) {
    check(size >= 16 && size % 8 == 0, "synth: size must be a multiple of 8 and >= 16, got ",
          size);
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "depth");

    Intrinsics intr{1.2 * double(size), 1.2 * double(size), double(size) / 2.0,
                    double(size) / 2.0, size, size};
    double near = 1.2, far = 0;
    double baseline = 0;
    switch (kind) {
    case SynthKind::TexturedPlane: far = 3.2; baseline = 0.15; break;
    case SynthKind::TexturedCube: far = 4.4; baseline = 0.18; break;
    case SynthKind::TwoPlane: far = 4.2; baseline = 0.16; break;
    }

    detail::SynthGeometry geo(kind, seed);
    std::vector<SceneView> views;
    struct Spec {
        Vec3 pos;
        ViewRole role;
    };
    // Two input views on a horizontal baseline; targets at the input poses
    // (reconstruction supervision) plus one novel middle view.
    std::vector<Spec> specs = {
        {{-baseline, 0, 0}, ViewRole::Input},  {{baseline, 0, 0}, ViewRole::Input},
        {{-baseline, 0, 0}, ViewRole::Target}, {{baseline, 0, 0}, ViewRole::Target},
        {{0, 0, 0}, ViewRole::Target},
    };
    for (size_t i = 0; i < specs.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "images/view_%03zu.png", i);
        views.push_back(detail::render_synth_view(geo, intr, specs[i].pos, specs[i].role, name));
    }
    for (size_t i = 0; i < views.size(); ++i) {
        write_png(dir / views[i].image_path, views[i].image);
        char dname[64];
        std::snprintf(dname, sizeof dname, "view_%03zu.rawf", i);
        write_rawf(dir / "depth" / dname, views[i].gt_depth);
    }
    save_cameras_json(dir, near, far, views);
}

} // namespace hgs::io
