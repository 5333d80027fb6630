// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/core/ops.hpp"

#include <array>

namespace hgs {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        return {x / n, y / n, z / n};
    }
};

struct Mat3 {
    // Row-major.
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(int r, int c) const { return m[size_t(r * 3 + c)]; }
    double& operator()(int r, int c) { return m[size_t(r * 3 + c)]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double acc = 0;
                for (int k = 0; k < 3; ++k) acc += (*this)(i, k) * o(k, j);
                r(i, j) = acc;
            }
        return r;
    }
    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }
    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
    /// max |R^T R - I| entry.
    double orthonormality_error() const {
        Mat3 g = transposed() * (*this);
        double e = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) e = std::max(e, std::fabs(g(i, j) - (i == j ? 1.0 : 0.0)));
        return e;
    }
    /// Gram-Schmidt on rows.
    Mat3 orthonormalized() const {
        Vec3 r0{m[0], m[1], m[2]}, r1{m[3], m[4], m[5]};
        r0 = r0.normalized();
        r1 = (r1 - r0 * r1.dot(r0)).normalized();
        Vec3 r2 = r0.cross(r1);
        Mat3 r;
        r.m = {r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z};
        return r;
    }
};

/// Pinhole intrinsics in pixels, with the image extents they refer to.
struct Intrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int64_t width = 0, height = 0;

    void validate() const {
        check(fx > 0 && fy > 0, "intrinsics: focal lengths must be positive, got fx=", fx,
              " fy=", fy);
        check(width > 0 && height > 0, "intrinsics: image extents must be positive");
        check(cx >= 0 && cx < double(width), "intrinsics: cx=", cx, " outside [0,", width, ")");
        check(cy >= 0 && cy < double(height), "intrinsics: cy=", cy, " outside [0,", height, ")");
    }

    /// Rescaled by the exact ratio of the new grid to the current one.
    Intrinsics scaled_to(int64_t new_w, int64_t new_h) const {
        double sx = double(new_w) / double(width);
        double sy = double(new_h) / double(height);
        return {fx * sx, fy * sy, cx * sx, cy * sy, new_w, new_h};
    }
};

/// Rigid world-to-camera transform. Construction validates SO(3).
class Pose {
public:
    Pose() = default;

    static Pose identity() { return Pose(); }

    static Pose from_rt(const Mat3& rotation, const Vec3& translation, double tol = 1e-9) {
        check(rotation.orthonormality_error() <= tol,
              "pose: rotation block is not orthonormal (error ",
              rotation.orthonormality_error(), ")");
        check(rotation.det() > 0, "pose: rotation determinant must be +1, got ", rotation.det());
        Pose p;
        p.r_ = rotation;
        p.t_ = translation;
        return p;
    }

    /// 16 row-major entries of a 4x4 [R|t; 0 0 0 1] matrix.
    static Pose from_matrix(const std::array<double, 16>& m, double tol = 1e-9) {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = m[size_t(i * 4 + j)];
        check(std::fabs(m[12]) < 1e-12 && std::fabs(m[13]) < 1e-12 && std::fabs(m[14]) < 1e-12 &&
                  std::fabs(m[15] - 1.0) < 1e-12,
              "pose: last row must be [0,0,0,1]");
        return from_rt(r, {m[3], m[7], m[11]}, tol);
    }

    const Mat3& rotation() const { return r_; }
    const Vec3& translation() const { return t_; }

    std::array<double, 16> matrix() const {
        return {r_(0, 0), r_(0, 1), r_(0, 2), t_.x, r_(1, 0), r_(1, 1), r_(1, 2), t_.y,
                r_(2, 0), r_(2, 1), r_(2, 2), t_.z, 0,        0,        0,        1};
    }

    Vec3 to_camera(const Vec3& world) const { return r_ * world + t_; }
    Vec3 to_world(const Vec3& cam) const { return r_.transposed() * (cam - t_); }
    Vec3 camera_center() const { return r_.transposed() * (t_ * -1.0); }

    Pose inverse() const {
        Pose p;
        p.r_ = r_.transposed();
        p.t_ = p.r_ * (t_ * -1.0);
        return p;
    }

    /// this ∘ other: applies `other` first.
    Pose compose(const Pose& other) const {
        Pose p;
        p.r_ = r_ * other.r_;
        p.t_ = r_ * other.t_ + t_;
        return p;
    }

private:
    Mat3 r_;
    Vec3 t_;
};

/// A posed image. Extents of the image tensor must match the intrinsics.
template <class T>
struct CameraView {
    Intrinsics intrinsics;
    Pose pose;
    Tensor<T> image; // [H,W,3] in [0,1]

    void validate() const {
        intrinsics.validate();
        check(image.defined() && image.rank() == 3 && image.shape()[2] == 3,
              "camera view: image must be [H,W,3]");
        check(image.shape()[0] == intrinsics.height && image.shape()[1] == intrinsics.width,
              "camera view: image is ", shape_str(image.shape()), " but intrinsics declare ",
              intrinsics.width, "x", intrinsics.height);
    }
};

/// Lifts a continuous pixel coordinate at a metric depth into world space.
inline Vec3 unproject(double u, double v, double depth, const Intrinsics& intr, const Pose& pose) {
    check(depth > 0, "unproject: depth must be positive, got ", depth);
    Vec3 cam{(u - intr.cx) / intr.fx * depth, (v - intr.cy) / intr.fy * depth, depth};
    return pose.to_world(cam);
}

struct PixelProjection {
    double u = 0, v = 0;
    double depth = 0; // camera-frame z
    bool visible = false;
};

/// Pinhole projection; points at or behind the camera are flagged, not thrown.
inline PixelProjection project(const Vec3& world, const Intrinsics& intr, const Pose& pose,
                               double z_eps = 1e-6) {
    Vec3 cam = pose.to_camera(world);
    PixelProjection p;
    p.depth = cam.z;
    if (cam.z <= z_eps) return p;
    p.u = intr.fx * cam.x / cam.z + intr.cx;
    p.v = intr.fy * cam.y / cam.z + intr.cy;
    p.visible = true;
    return p;
}

/// Warp src features onto the dst grid through a fronto-parallel plane at
/// depth d_k (in the dst camera frame). Out-of-frustum samples are zero.
/// Differentiable w.r.t. src_feat.
template <class T>
Tensor<T> plane_sweep_warp(const Tensor<T>& src_feat, const Pose& dst_pose, const Pose& src_pose,
                           const Intrinsics& intr_dst, const Intrinsics& intr_src, double d_k) {
    check(d_k > 0, "plane_sweep_warp: plane depth must be positive, got ", d_k);
    check(src_feat.rank() == 3, "plane_sweep_warp: src features must be [h,w,C]");
    check(src_feat.shape()[0] == intr_src.height && src_feat.shape()[1] == intr_src.width,
          "plane_sweep_warp: src feature grid ", shape_str(src_feat.shape()),
          " does not match src intrinsics ", intr_src.width, "x", intr_src.height);
    int64_t h = intr_dst.height, w = intr_dst.width;
    // dst camera frame -> src camera frame
    Pose rel = src_pose.compose(dst_pose.inverse());
    Tensor<T> coords = Tensor<T>::zeros({h, w, 2});
    T* pc = coords.ptr();
    for (int64_t iy = 0; iy < h; ++iy)
        for (int64_t ix = 0; ix < w; ++ix) {
            double u = double(ix) + 0.5, v = double(iy) + 0.5;
            Vec3 cam_dst{(u - intr_dst.cx) / intr_dst.fx * d_k,
                         (v - intr_dst.cy) / intr_dst.fy * d_k, d_k};
            Vec3 cam_src = rel.rotation() * cam_dst + rel.translation();
            T* out = pc + (iy * w + ix) * 2;
            if (cam_src.z <= 1e-9) {
                // Far outside the grid: every bilinear tap lands out of bounds.
                out[0] = T(-1e9);
                out[1] = T(-1e9);
                continue;
            }
            double us = intr_src.fx * cam_src.x / cam_src.z + intr_src.cx;
            double vs = intr_src.fy * cam_src.y / cam_src.z + intr_src.cy;
            // Continuous pixel coords have centers at half-integers; the
            // sampler addresses array coordinates.
            out[0] = T(us - 0.5);
            out[1] = T(vs - 0.5);
        }
    return bilinear_sample(src_feat, coords);
}

} // namespace hgs
