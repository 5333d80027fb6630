// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force per-pixel compositing oracle. Kept deliberately independent of
// the tiled renderer: it does its own projection, its own SH evaluation and
// its own per-pixel loop over every primitive, in plain double arithmetic.

#include "hgs/gaussian.hpp"

namespace hgs {

template <class T>
Tensor<T> render_reference(const GaussianSet<T>& set, const Intrinsics& intr, const Pose& pose,
                           std::array<double, 3> background = {0, 0, 0}, double dilation = 0.3,
                           double alpha_skip = 1.0 / 255.0, double t_floor = 1e-4,
                           double z_near = 1e-4) {
    struct Flat {
        double u, v;       // projected mean
        double ia, ib, ic; // inverse 2x2 covariance
        double depth;
        double alpha;
        double col[3];
        int64_t order;
    };
    std::vector<Flat> flats;

    Vec3 cam_pos = pose.camera_center();
    int64_t order = 0;
    for (const auto& blk : set.stages) {
        const T* pc = blk.centers.ptr();
        const T* ps = blk.scales.ptr();
        const T* pr = blk.rotations.ptr();
        const T* po = blk.opacities.ptr();
        const T* psh = blk.sh.ptr();
        int coeffs = sh_coeff_count(blk.sh_degree);
        for (int64_t i = 0; i < blk.count(); ++i, ++order) {
            double px = pc[i * 3], py = pc[i * 3 + 1], pz = pc[i * 3 + 2];
            // world -> camera, row by row
            const Mat3& rr = pose.rotation();
            const Vec3& tt = pose.translation();
            double tx = rr(0, 0) * px + rr(0, 1) * py + rr(0, 2) * pz + tt.x;
            double ty = rr(1, 0) * px + rr(1, 1) * py + rr(1, 2) * pz + tt.y;
            double tz = rr(2, 0) * px + rr(2, 1) * py + rr(2, 2) * pz + tt.z;
            if (tz <= z_near) continue;

            // 3D covariance from quaternion and scales.
            double qw = pr[i * 4], qx = pr[i * 4 + 1], qy = pr[i * 4 + 2], qz = pr[i * 4 + 3];
            double rot[3][3] = {
                {1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qw * qz), 2 * (qx * qz + qw * qy)},
                {2 * (qx * qy + qw * qz), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qw * qx)},
                {2 * (qx * qz - qw * qy), 2 * (qy * qz + qw * qx), 1 - 2 * (qx * qx + qy * qy)}};
            double sv[3] = {double(ps[i * 3]) * double(ps[i * 3]),
                            double(ps[i * 3 + 1]) * double(ps[i * 3 + 1]),
                            double(ps[i * 3 + 2]) * double(ps[i * 3 + 2])};
            double cov3[3][3];
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    cov3[a][b] = rot[a][0] * sv[0] * rot[b][0] + rot[a][1] * sv[1] * rot[b][1] +
                                 rot[a][2] * sv[2] * rot[b][2];

            // T = J * W, then cov2 = T cov3 T^T + dilation I.
            double j[2][3] = {{intr.fx / tz, 0, -intr.fx * tx / (tz * tz)},
                              {0, intr.fy / tz, -intr.fy * ty / (tz * tz)}};
            double tw[2][3];
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 3; ++b)
                    tw[a][b] = j[a][0] * rr(0, b) + j[a][1] * rr(1, b) + j[a][2] * rr(2, b);
            double tmp[2][3];
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 3; ++b)
                    tmp[a][b] =
                        tw[a][0] * cov3[0][b] + tw[a][1] * cov3[1][b] + tw[a][2] * cov3[2][b];
            double ca = tmp[0][0] * tw[0][0] + tmp[0][1] * tw[0][1] + tmp[0][2] * tw[0][2] +
                        dilation;
            double cb = tmp[0][0] * tw[1][0] + tmp[0][1] * tw[1][1] + tmp[0][2] * tw[1][2];
            double cc = tmp[1][0] * tw[1][0] + tmp[1][1] * tw[1][1] + tmp[1][2] * tw[1][2] +
                        dilation;
            double det = ca * cc - cb * cb;
            if (det <= 0) continue;

            Flat f;
            f.u = intr.fx * tx / tz + intr.cx;
            f.v = intr.fy * ty / tz + intr.cy;
            f.ia = cc / det;
            f.ib = -cb / det;
            f.ic = ca / det;
            f.depth = tz;
            f.alpha = po[i];
            f.order = order;

            // View-dependent color via the real SH series.
            double dx = px - cam_pos.x, dy = py - cam_pos.y, dz = pz - cam_pos.z;
            double dn = std::sqrt(dx * dx + dy * dy + dz * dz);
            Vec3 dir{dx / dn, dy / dn, dz / dn};
            double basis[16];
            sh_basis(blk.sh_degree, dir, basis);
            for (int ch = 0; ch < 3; ++ch) {
                double acc = 0.5;
                for (int k = 0; k < coeffs; ++k) acc += basis[k] * double(psh[i * coeffs * 3 + k * 3 + ch]);
                f.col[ch] = std::clamp(acc, 0.0, 1.0);
            }
            flats.push_back(f);
        }
    }
    std::stable_sort(flats.begin(), flats.end(), [](const Flat& a, const Flat& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.order < b.order;
    });

    int64_t h = intr.height, w = intr.width;
    Tensor<T> img = Tensor<T>::zeros({h, w, 3});
    for (int64_t yy = 0; yy < h; ++yy)
        for (int64_t xx = 0; xx < w; ++xx) {
            double px = double(xx) + 0.5, py = double(yy) + 0.5;
            double trans = 1.0, acc[3] = {0, 0, 0};
            for (const Flat& f : flats) {
                double du = px - f.u, dv = py - f.v;
                double q = f.ia * du * du + 2.0 * f.ib * du * dv + f.ic * dv * dv;
                double a = f.alpha * std::exp(-0.5 * q);
                if (a < alpha_skip) continue;
                for (int ch = 0; ch < 3; ++ch) acc[ch] += trans * a * f.col[ch];
                trans *= 1.0 - a;
                if (trans < t_floor) break;
            }
            T* out = img.ptr() + (yy * w + xx) * 3;
            for (int ch = 0; ch < 3; ++ch)
                out[ch] = T(acc[ch] + trans * background[size_t(ch)]);
        }
    return img;
}

} // namespace hgs
