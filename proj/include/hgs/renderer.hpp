// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/gaussian.hpp"
#include "hgs/core/thread_pool.hpp"

#include <memory>

namespace hgs {

struct RenderConfig {
    int tile_size = 16;
    double dilation = 0.3;        // screen-space covariance floor, px^2
    double alpha_skip = 1.0 / 255.0;
    double t_floor = 1e-4;        // transmittance early-exit
    double z_near = 1e-4;
};

template <class T>
struct RenderOutput {
    Tensor<T> color;              // [H,W,3], differentiable
    Tensor<T> alpha;              // [H,W], diagnostic (not differentiated)
    std::vector<int> contributors; // per-pixel composited count
};

namespace splat {

/// Screen-space Gaussian with everything the backward pass needs.
struct Projected {
    double mean_u = 0, mean_v = 0;
    double cov_a = 0, cov_b = 0, cov_c = 0; // dilated 2x2 covariance
    double inv_a = 0, inv_b = 0, inv_c = 0;
    double depth = 0;
    double opacity = 0;
    double rgb[3] = {0, 0, 0};
    double pre_rgb[3] = {0, 0, 0}; // before the [0,1] clamp
    double radius = 0;             // skip-threshold cutoff radius, px
    Vec3 cam;                      // camera-frame center
    Vec3 world;                    // world center
    Vec3 view_dir;                 // unit direction camera->center
    double view_dist = 0;
    size_t block = 0;              // stage block index
    int64_t row = 0;               // row within the block
    int64_t flat_index = 0;        // global index (render tie-break)
    int sh_degree = 0;
};

inline Mat3 quat_to_mat(double w, double x, double y, double z) {
    Mat3 r;
    r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),    2 * (x * z + w * y),
           2 * (x * y + w * z),    1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
           2 * (x * z - w * y),    2 * (y * z + w * x),    1 - 2 * (x * x + y * y)};
    return r;
}

/// EWA projection of one primitive; returns false when culled.
inline bool project_gaussian_impl(const Vec3& world, const Vec3& scale, const double quat[4],
                                  double opacity, const double* sh, int sh_degree,
                                  const Intrinsics& intr, const Pose& pose,
                                  const RenderConfig& cfg, Projected& out) {
    Vec3 t = pose.to_camera(world);
    if (t.z <= cfg.z_near) return false;
    if (opacity <= cfg.alpha_skip) return false;

    out.world = world;
    out.cam = t;
    out.depth = t.z;
    out.opacity = opacity;
    out.sh_degree = sh_degree;

    out.mean_u = intr.fx * t.x / t.z + intr.cx;
    out.mean_v = intr.fy * t.y / t.z + intr.cy;

    Mat3 r3 = quat_to_mat(quat[0], quat[1], quat[2], quat[3]);
    // M = J * W rows (2x3)
    const Mat3& w_rot = pose.rotation();
    double j00 = intr.fx / t.z, j02 = -intr.fx * t.x / (t.z * t.z);
    double j11 = intr.fy / t.z, j12 = -intr.fy * t.y / (t.z * t.z);
    double m0[3], m1[3];
    for (int c = 0; c < 3; ++c) {
        m0[c] = j00 * w_rot(0, c) + j02 * w_rot(2, c);
        m1[c] = j11 * w_rot(1, c) + j12 * w_rot(2, c);
    }
    // Sigma = R diag(s^2) R^T ; cov2d = M Sigma M^T + dilation*I
    double sig[3][3];
    double s2[3] = {scale.x * scale.x, scale.y * scale.y, scale.z * scale.z};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int k = 0; k < 3; ++k) acc += r3(i, k) * s2[k] * r3(j, k);
            sig[i][j] = acc;
        }
    auto quad = [&](const double* a, const double* b) {
        double acc = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) acc += a[i] * sig[i][j] * b[j];
        return acc;
    };
    out.cov_a = quad(m0, m0) + cfg.dilation;
    out.cov_b = quad(m0, m1);
    out.cov_c = quad(m1, m1) + cfg.dilation;

    double det = out.cov_a * out.cov_c - out.cov_b * out.cov_b;
    if (det <= 0) return false; // dilation keeps this positive in practice
    out.inv_a = out.cov_c / det;
    out.inv_b = -out.cov_b / det;
    out.inv_c = out.cov_a / det;

    // Cutoff where alpha*g falls to the skip threshold, bounded via the
    // largest eigenvalue; conservative w.r.t. the 1/255 skip rule.
    double mid = 0.5 * (out.cov_a + out.cov_c);
    double lam = mid + std::sqrt(std::max(mid * mid - det, 0.0));
    double log_ratio = std::log(opacity / cfg.alpha_skip);
    out.radius = std::sqrt(2.0 * std::max(log_ratio, 0.0) * lam) + 1e-6;

    // Frustum test against pixel centers.
    if (out.mean_u + out.radius < 0.5 || out.mean_u - out.radius > double(intr.width) - 0.5 ||
        out.mean_v + out.radius < 0.5 || out.mean_v - out.radius > double(intr.height) - 0.5)
        return false;

    Vec3 cam_center = pose.camera_center();
    Vec3 dir = world - cam_center;
    out.view_dist = dir.norm();
    out.view_dir = dir * (1.0 / out.view_dist);
    double basis[16];
    sh_basis(sh_degree, out.view_dir, basis);
    int coeffs = sh_coeff_count(sh_degree);
    for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.5;
        for (int k = 0; k < coeffs; ++k) acc += basis[k] * sh[k * 3 + ch];
        out.pre_rgb[ch] = acc;
        out.rgb[ch] = std::clamp(acc, 0.0, 1.0);
    }
    return true;
}

/// Immutable state captured by a forward render for its backward pass.
template <class T>
struct RenderState {
    Intrinsics intr;
    Pose pose;
    RenderConfig cfg;
    std::array<double, 3> background;
    std::vector<Projected> gaussians;         // depth-sorted
    std::vector<std::vector<int32_t>> bins;   // per tile, indices into gaussians
    int tiles_x = 0, tiles_y = 0;
    std::vector<StageGaussians<T>> blocks;    // source tensors (shared handles)
};

template <class T>
void project_and_bin(RenderState<T>& st) {
    const int64_t w = st.intr.width, h = st.intr.height;
    st.gaussians.clear();
    int64_t flat = 0;
    for (size_t b = 0; b < st.blocks.size(); ++b) {
        const auto& blk = st.blocks[b];
        const T* pc = blk.centers.defined() ? blk.centers.ptr() : nullptr;
        const T* ps = blk.scales.ptr();
        const T* pr = blk.rotations.ptr();
        const T* po = blk.opacities.ptr();
        const T* psh = blk.sh.ptr();
        int coeffs = sh_coeff_count(blk.sh_degree);
        for (int64_t i = 0; i < blk.count(); ++i, ++flat) {
            Vec3 world{double(pc[i * 3]), double(pc[i * 3 + 1]), double(pc[i * 3 + 2])};
            Vec3 scale{double(ps[i * 3]), double(ps[i * 3 + 1]), double(ps[i * 3 + 2])};
            double quat[4] = {double(pr[i * 4]), double(pr[i * 4 + 1]), double(pr[i * 4 + 2]),
                              double(pr[i * 4 + 3])};
            std::vector<double> shv(size_t(coeffs * 3));
            for (int k = 0; k < coeffs * 3; ++k) shv[size_t(k)] = double(psh[i * coeffs * 3 + k]);
            Projected pj;
            if (!project_gaussian_impl(world, scale, quat, double(po[i]), shv.data(),
                                       blk.sh_degree, st.intr, st.pose, st.cfg, pj))
                continue;
            pj.block = b;
            pj.row = i;
            pj.flat_index = flat;
            st.gaussians.push_back(pj);
        }
    }
    std::stable_sort(st.gaussians.begin(), st.gaussians.end(),
                     [](const Projected& a, const Projected& b) {
                         if (a.depth != b.depth) return a.depth < b.depth;
                         return a.flat_index < b.flat_index;
                     });

    const int ts = st.cfg.tile_size;
    st.tiles_x = int((w + ts - 1) / ts);
    st.tiles_y = int((h + ts - 1) / ts);
    st.bins.assign(size_t(st.tiles_x * st.tiles_y), {});
    for (size_t gi = 0; gi < st.gaussians.size(); ++gi) {
        const Projected& g = st.gaussians[gi];
        int64_t x0 = std::max<int64_t>(0, int64_t(std::ceil(g.mean_u - g.radius - 0.5)));
        int64_t x1 = std::min<int64_t>(w - 1, int64_t(std::floor(g.mean_u + g.radius - 0.5)));
        int64_t y0 = std::max<int64_t>(0, int64_t(std::ceil(g.mean_v - g.radius - 0.5)));
        int64_t y1 = std::min<int64_t>(h - 1, int64_t(std::floor(g.mean_v + g.radius - 0.5)));
        if (x0 > x1 || y0 > y1) continue;
        for (int64_t tyi = y0 / ts; tyi <= y1 / ts; ++tyi)
            for (int64_t txi = x0 / ts; txi <= x1 / ts; ++txi)
                st.bins[size_t(tyi * st.tiles_x + txi)].push_back(int32_t(gi));
    }
}

template <class T>
void composite_forward(const RenderState<T>& st, T* color, T* alpha, int* contributors) {
    const int64_t w = st.intr.width, h = st.intr.height;
    const int ts = st.cfg.tile_size;
    const double tau = st.cfg.alpha_skip;
    parallel_ranges(int64_t(st.tiles_x) * st.tiles_y, [&](int64_t tb, int64_t te) {
        for (int64_t tile = tb; tile < te; ++tile) {
            int64_t tx = tile % st.tiles_x, ty = tile / st.tiles_x;
            const auto& bin = st.bins[size_t(tile)];
            int64_t px0 = tx * ts, px1 = std::min<int64_t>(w, px0 + ts);
            int64_t py0 = ty * ts, py1 = std::min<int64_t>(h, py0 + ts);
            for (int64_t py = py0; py < py1; ++py)
                for (int64_t px = px0; px < px1; ++px) {
                    double cx = double(px) + 0.5, cy = double(py) + 0.5;
                    double trans = 1.0;
                    double acc[3] = {0, 0, 0};
                    int count = 0;
                    for (int32_t gi : bin) {
                        const Projected& g = st.gaussians[size_t(gi)];
                        double dx = cx - g.mean_u, dy = cy - g.mean_v;
                        double q = g.inv_a * dx * dx + 2.0 * g.inv_b * dx * dy +
                                   g.inv_c * dy * dy;
                        double a = g.opacity * std::exp(-0.5 * q);
                        if (a < tau) continue;
                        for (int ch = 0; ch < 3; ++ch) acc[ch] += trans * a * g.rgb[ch];
                        trans *= 1.0 - a;
                        ++count;
                        if (trans < st.cfg.t_floor) break;
                    }
                    int64_t pix = py * w + px;
                    for (int ch = 0; ch < 3; ++ch)
                        color[pix * 3 + ch] = T(acc[ch] + trans * st.background[size_t(ch)]);
                    alpha[pix] = T(1.0 - trans);
                    contributors[pix] = count;
                }
        }
    });
}

struct PixGrad {
    double mean_u = 0, mean_v = 0;
    double inv_a = 0, inv_b = 0, inv_c = 0;
    double opacity = 0;
    double rgb[3] = {0, 0, 0};
};

/// Screen-space gradient accumulation. Per-tile partials are merged in tile
/// order, so results do not depend on the worker count.
template <class T>
std::vector<PixGrad> composite_backward(const RenderState<T>& st, const T* d_color) {
    const int64_t w = st.intr.width, h = st.intr.height;
    const int ts = st.cfg.tile_size;
    const double tau = st.cfg.alpha_skip;
    const int64_t tile_count = int64_t(st.tiles_x) * st.tiles_y;
    std::vector<std::vector<PixGrad>> tile_grads(static_cast<size_t>(tile_count));

    parallel_ranges(tile_count, [&](int64_t tb, int64_t te) {
        struct Hit {
            int32_t pos;
            double a, trans;
        };
        std::vector<Hit> hits;
        for (int64_t tile = tb; tile < te; ++tile) {
            const auto& bin = st.bins[size_t(tile)];
            auto& grads = tile_grads[size_t(tile)];
            grads.assign(bin.size(), PixGrad{});
            if (bin.empty()) continue;
            int64_t tx = tile % st.tiles_x, ty = tile / st.tiles_x;
            int64_t px0 = tx * ts, px1 = std::min<int64_t>(w, px0 + ts);
            int64_t py0 = ty * ts, py1 = std::min<int64_t>(h, py0 + ts);
            for (int64_t py = py0; py < py1; ++py)
                for (int64_t px = px0; px < px1; ++px) {
                    int64_t pix = py * w + px;
                    double gl[3] = {double(d_color[pix * 3]), double(d_color[pix * 3 + 1]),
                                    double(d_color[pix * 3 + 2])};
                    if (gl[0] == 0 && gl[1] == 0 && gl[2] == 0) continue;
                    double cx = double(px) + 0.5, cy = double(py) + 0.5;
                    // Pass 1: replay compositing, keeping per-hit state.
                    hits.clear();
                    double trans = 1.0;
                    for (size_t k = 0; k < bin.size(); ++k) {
                        const Projected& g = st.gaussians[size_t(bin[k])];
                        double dx = cx - g.mean_u, dy = cy - g.mean_v;
                        double q = g.inv_a * dx * dx + 2.0 * g.inv_b * dx * dy +
                                   g.inv_c * dy * dy;
                        double a = g.opacity * std::exp(-0.5 * q);
                        if (a < tau) continue;
                        hits.push_back({int32_t(k), a, trans});
                        trans *= 1.0 - a;
                        if (trans < st.cfg.t_floor) break;
                    }
                    // Pass 2: reverse sweep with suffix recurrences.
                    // dC/da_i = T_i (c_i - V_i - Q_i * bg), all division-free.
                    double v_behind[3] = {0, 0, 0};
                    double q_suffix = 1.0;
                    for (size_t k = hits.size(); k-- > 0;) {
                        const Hit& hit = hits[size_t(k)];
                        const Projected& g = st.gaussians[size_t(bin[hit.pos])];
                        PixGrad& pg = grads[size_t(hit.pos)];
                        double dx = cx - g.mean_u, dy = cy - g.mean_v;
                        double d_a = 0;
                        for (int ch = 0; ch < 3; ++ch) {
                            double gc = gl[ch];
                            pg.rgb[ch] += gc * hit.trans * hit.a;
                            d_a += gc * hit.trans *
                                   (g.rgb[ch] - v_behind[ch] -
                                    q_suffix * st.background[size_t(ch)]);
                        }
                        // a = opacity * exp(-q/2)
                        double g_of_x = hit.a / g.opacity;
                        pg.opacity += d_a * g_of_x;
                        double d_q = d_a * g.opacity * g_of_x * -0.5;
                        pg.inv_a += d_q * dx * dx;
                        pg.inv_b += d_q * 2.0 * dx * dy;
                        pg.inv_c += d_q * dy * dy;
                        double d_dx = d_q * (2.0 * g.inv_a * dx + 2.0 * g.inv_b * dy);
                        double d_dy = d_q * (2.0 * g.inv_c * dy + 2.0 * g.inv_b * dx);
                        pg.mean_u -= d_dx;
                        pg.mean_v -= d_dy;
                        for (int ch = 0; ch < 3; ++ch)
                            v_behind[ch] = hit.a * g.rgb[ch] + (1.0 - hit.a) * v_behind[ch];
                        q_suffix *= 1.0 - hit.a;
                    }
                }
        }
    });

    // Deterministic merge in tile order.
    std::vector<PixGrad> merged(st.gaussians.size());
    for (int64_t tile = 0; tile < tile_count; ++tile) {
        const auto& bin = st.bins[size_t(tile)];
        const auto& grads = tile_grads[size_t(tile)];
        for (size_t k = 0; k < bin.size(); ++k) {
            PixGrad& dst = merged[size_t(bin[k])];
            const PixGrad& src = grads[k];
            dst.mean_u += src.mean_u;
            dst.mean_v += src.mean_v;
            dst.inv_a += src.inv_a;
            dst.inv_b += src.inv_b;
            dst.inv_c += src.inv_c;
            dst.opacity += src.opacity;
            for (int ch = 0; ch < 3; ++ch) dst.rgb[ch] += src.rgb[ch];
        }
    }
    return merged;
}

/// Derivatives of the real SH basis w.r.t. the unit direction.
inline void sh_basis_grad(int degree, const Vec3& d, double out[16][3]) {
    for (int k = 0; k < 16; ++k) out[k][0] = out[k][1] = out[k][2] = 0;
    if (degree < 1) return;
    out[1][1] = -kShC1;
    out[2][2] = kShC1;
    out[3][0] = -kShC1;
    if (degree < 2) return;
    double x = d.x, y = d.y, z = d.z;
    out[4][0] = kShC2[0] * y;
    out[4][1] = kShC2[0] * x;
    out[5][1] = kShC2[1] * z;
    out[5][2] = kShC2[1] * y;
    out[6][0] = kShC2[2] * -2.0 * x;
    out[6][1] = kShC2[2] * -2.0 * y;
    out[6][2] = kShC2[2] * 4.0 * z;
    out[7][0] = kShC2[3] * z;
    out[7][2] = kShC2[3] * x;
    out[8][0] = kShC2[4] * 2.0 * x;
    out[8][1] = kShC2[4] * -2.0 * y;
    if (degree < 3) return;
    out[9][0] = kShC3[0] * 6.0 * x * y;
    out[9][1] = kShC3[0] * (3.0 * x * x - 3.0 * y * y);
    out[10][0] = kShC3[1] * y * z;
    out[10][1] = kShC3[1] * x * z;
    out[10][2] = kShC3[1] * x * y;
    out[11][0] = kShC3[2] * -2.0 * x * y;
    out[11][1] = kShC3[2] * (4.0 * z * z - x * x - 3.0 * y * y);
    out[11][2] = kShC3[2] * 8.0 * y * z;
    out[12][0] = kShC3[3] * -6.0 * x * z;
    out[12][1] = kShC3[3] * -6.0 * y * z;
    out[12][2] = kShC3[3] * (6.0 * z * z - 3.0 * x * x - 3.0 * y * y);
    out[13][0] = kShC3[4] * (4.0 * z * z - 3.0 * x * x - y * y);
    out[13][1] = kShC3[4] * -2.0 * x * y;
    out[13][2] = kShC3[4] * 8.0 * x * z;
    out[14][0] = kShC3[5] * 2.0 * x * z;
    out[14][1] = kShC3[5] * -2.0 * y * z;
    out[14][2] = kShC3[5] * (x * x - y * y);
    out[15][0] = kShC3[6] * (3.0 * x * x - 3.0 * y * y);
    out[15][1] = kShC3[6] * -6.0 * x * y;
}


/// Chains screen-space gradients back to the primitive parameters and
/// accumulates into the source tensors' grad buffers.
template <class T>
void parameter_backward(RenderState<T>& st, const std::vector<PixGrad>& pix) {
    for (size_t gi = 0; gi < st.gaussians.size(); ++gi) {
        const Projected& g = st.gaussians[gi];
        const PixGrad& pg = pix[gi];
        auto& blk = st.blocks[g.block];
        const int64_t i = g.row;
        const Vec3& t = g.cam;

        // inverse covariance -> covariance: dC = -Cinv * G * Cinv (sym).
        double det = g.cov_a * g.cov_c - g.cov_b * g.cov_b;
        (void)det;
        double ia = g.inv_a, ib = g.inv_b, ic = g.inv_c;
        double g00 = pg.inv_a, g01 = 0.5 * pg.inv_b, g11 = pg.inv_c;
        // M1 = Cinv * G
        double m00 = ia * g00 + ib * g01, m01 = ia * g01 + ib * g11;
        double m10 = ib * g00 + ic * g01, m11 = ib * g01 + ic * g11;
        // dC = -(M1 * Cinv)
        double dca = -(m00 * ia + m01 * ib);
        double dcb01 = -(m00 * ib + m01 * ic);
        double dcb10 = -(m10 * ia + m11 * ib);
        double dcc = -(m10 * ib + m11 * ic);
        double dcb = dcb01 + dcb10; // single symmetric parameter

        // cov = M Sigma M^T + dilation I, with M rows m0, m1.
        const Mat3& w_rot = st.pose.rotation();
        double fx = st.intr.fx, fy = st.intr.fy;
        double j00 = fx / t.z, j02 = -fx * t.x / (t.z * t.z);
        double j11 = fy / t.z, j12 = -fy * t.y / (t.z * t.z);
        double m0[3], m1[3];
        for (int c = 0; c < 3; ++c) {
            m0[c] = j00 * w_rot(0, c) + j02 * w_rot(2, c);
            m1[c] = j11 * w_rot(1, c) + j12 * w_rot(2, c);
        }
        const T* pr = blk.rotations.ptr();
        const T* ps = blk.scales.ptr();
        double qw = double(pr[i * 4]), qx = double(pr[i * 4 + 1]), qy = double(pr[i * 4 + 2]),
               qz = double(pr[i * 4 + 3]);
        Mat3 r3 = quat_to_mat(qw, qx, qy, qz);
        double s[3] = {double(ps[i * 3]), double(ps[i * 3 + 1]), double(ps[i * 3 + 2])};
        double sig[3][3];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                double acc = 0;
                for (int k = 0; k < 3; ++k) acc += r3(a, k) * s[k] * s[k] * r3(b, k);
                sig[a][b] = acc;
            }

        // dSigma = M^T dC M (dC = [[dca, dcb/2],[dcb/2, dcc]] in full-matrix form)
        double dc_full[2][2] = {{dca, 0.5 * dcb}, {0.5 * dcb, dcc}};
        double dsig[3][3];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                double rows[2] = {m0[a], m1[a]};
                double cols[2] = {m0[b], m1[b]};
                double acc = 0;
                for (int u = 0; u < 2; ++u)
                    for (int v = 0; v < 2; ++v) acc += rows[u] * dc_full[u][v] * cols[v];
                dsig[a][b] = acc;
            }

        // dM = 2 dC M Sigma  (rows)
        double msig[2][3];
        for (int u = 0; u < 2; ++u)
            for (int b = 0; b < 3; ++b) {
                const double* mr = u == 0 ? m0 : m1;
                double acc = 0;
                for (int k = 0; k < 3; ++k) acc += mr[k] * sig[k][b];
                msig[u][b] = acc;
            }
        double dm0[3], dm1[3];
        for (int b = 0; b < 3; ++b) {
            dm0[b] = 2.0 * (dc_full[0][0] * msig[0][b] + dc_full[0][1] * msig[1][b]);
            dm1[b] = 2.0 * (dc_full[1][0] * msig[0][b] + dc_full[1][1] * msig[1][b]);
        }
        // dJ entries via M = J W: dJ = dM W^T
        double dj00 = 0, dj02 = 0, dj11 = 0, dj12 = 0;
        for (int c = 0; c < 3; ++c) {
            dj00 += dm0[c] * w_rot(0, c);
            dj02 += dm0[c] * w_rot(2, c);
            dj11 += dm1[c] * w_rot(1, c);
            dj12 += dm1[c] * w_rot(2, c);
        }

        // Mean gradients through the pinhole projection.
        double du = pg.mean_u, dv = pg.mean_v;
        Vec3 dt{du * fx / t.z, dv * fy / t.z,
                -du * fx * t.x / (t.z * t.z) - dv * fy * t.y / (t.z * t.z)};
        // J(t) dependence of the covariance.
        double z2 = t.z * t.z, z3 = z2 * t.z;
        dt.x += dj02 * (-fx / z2);
        dt.y += dj12 * (-fy / z2);
        dt.z += dj00 * (-fx / z2) + dj11 * (-fy / z2) + dj02 * (2.0 * fx * t.x / z3) +
                dj12 * (2.0 * fy * t.y / z3);

        Vec3 dworld = w_rot.transposed() * dt;

        // Scale gradients: ds_k = 2 s_k (R^T dSigma R)_kk.
        double dscale[3];
        for (int k = 0; k < 3; ++k) {
            double acc = 0;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) acc += r3(a, k) * dsig[a][b] * r3(b, k);
            dscale[k] = 2.0 * s[k] * acc;
        }
        // Rotation gradients: dR = 2 dSigma R diag(s^2), then dR/dq.
        double dr[3][3];
        for (int a = 0; a < 3; ++a)
            for (int k = 0; k < 3; ++k) {
                double acc = 0;
                for (int b = 0; b < 3; ++b) acc += dsig[a][b] * r3(b, k);
                dr[a][k] = 2.0 * acc * s[k] * s[k];
            }
        auto dot_dr = [&](const double m[3][3]) {
            double acc = 0;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) acc += dr[a][b] * m[a][b];
            return acc;
        };
        const double w_ = qw, x_ = qx, y_ = qy, z_ = qz;
        double dRw[3][3] = {{0, -2 * z_, 2 * y_}, {2 * z_, 0, -2 * x_}, {-2 * y_, 2 * x_, 0}};
        double dRx[3][3] = {{0, 2 * y_, 2 * z_}, {2 * y_, -4 * x_, -2 * w_}, {2 * z_, 2 * w_, -4 * x_}};
        double dRy[3][3] = {{-4 * y_, 2 * x_, 2 * w_}, {2 * x_, 0, 2 * z_}, {-2 * w_, 2 * z_, -4 * y_}};
        double dRz[3][3] = {{-4 * z_, -2 * w_, 2 * x_}, {2 * w_, -4 * z_, 2 * y_}, {2 * x_, 2 * y_, 0}};
        double dquat[4] = {dot_dr(dRw), dot_dr(dRx), dot_dr(dRy), dot_dr(dRz)};

        // Color gradients through SH (clamped channels pass no gradient).
        int coeffs = sh_coeff_count(g.sh_degree);
        double basis[16];
        sh_basis(g.sh_degree, g.view_dir, basis);
        double d_dir_acc[3] = {0, 0, 0};
        const T* psh = blk.sh.ptr();
        std::vector<double> dsh(size_t(coeffs * 3), 0.0);
        for (int ch = 0; ch < 3; ++ch) {
            if (g.pre_rgb[ch] < 0.0 || g.pre_rgb[ch] > 1.0) continue;
            double gc = pg.rgb[ch];
            if (gc == 0) continue;
            for (int k = 0; k < coeffs; ++k) dsh[size_t(k * 3 + ch)] += gc * basis[k];
            if (g.sh_degree >= 1) {
                double db[16][3];
                sh_basis_grad(g.sh_degree, g.view_dir, db);
                for (int k = 1; k < coeffs; ++k) {
                    double c = double(psh[i * coeffs * 3 + k * 3 + ch]);
                    for (int ax = 0; ax < 3; ++ax) d_dir_acc[ax] += gc * c * db[k][ax];
                }
            }
        }
        // dir = (p - cam_center)/dist: d p += (I - dir dir^T)/dist * d_dir
        if (g.sh_degree >= 1) {
            const Vec3& dvec = g.view_dir;
            double dd = d_dir_acc[0] * dvec.x + d_dir_acc[1] * dvec.y + d_dir_acc[2] * dvec.z;
            dworld.x += (d_dir_acc[0] - dvec.x * dd) / g.view_dist;
            dworld.y += (d_dir_acc[1] - dvec.y * dd) / g.view_dist;
            dworld.z += (d_dir_acc[2] - dvec.z * dd) / g.view_dist;
        }

        if (blk.centers.wants_grad()) {
            auto& gc = blk.centers.grad();
            gc[size_t(i * 3 + 0)] += T(dworld.x);
            gc[size_t(i * 3 + 1)] += T(dworld.y);
            gc[size_t(i * 3 + 2)] += T(dworld.z);
        }
        if (blk.scales.wants_grad()) {
            auto& gs = blk.scales.grad();
            for (int k = 0; k < 3; ++k) gs[size_t(i * 3 + k)] += T(dscale[k]);
        }
        if (blk.rotations.wants_grad()) {
            auto& gr = blk.rotations.grad();
            for (int k = 0; k < 4; ++k) gr[size_t(i * 4 + k)] += T(dquat[k]);
        }
        if (blk.opacities.wants_grad()) blk.opacities.grad()[size_t(i)] += T(pg.opacity);
        if (blk.sh.wants_grad()) {
            auto& gsh = blk.sh.grad();
            for (int k = 0; k < coeffs * 3; ++k) gsh[size_t(i * coeffs * 3 + k)] += T(dsh[size_t(k)]);
        }
    }
}

} // namespace splat

/// Differentiable splat render of a Gaussian set from one camera. When a tape
/// is active and any source tensor participates in differentiation, the color
/// output is recorded with the analytic backward pass.
template <class T>
RenderOutput<T> render(const GaussianSet<T>& set, const Intrinsics& intr, const Pose& pose,
                       std::array<double, 3> background = {0, 0, 0},
                       const RenderConfig& cfg = {}) {
    intr.validate();
    auto state = std::make_shared<splat::RenderState<T>>();
    state->intr = intr;
    state->pose = pose;
    state->cfg = cfg;
    state->background = background;
    state->blocks = set.stages;

    const int64_t h = intr.height, w = intr.width;
    RenderOutput<T> out;
    out.color = Tensor<T>::zeros({h, w, 3});
    out.alpha = Tensor<T>::zeros({h, w});
    out.contributors.assign(size_t(h * w), 0);

    splat::project_and_bin(*state);
    splat::composite_forward(*state, out.color.ptr(), out.alpha.ptr(), out.contributors.data());

    std::vector<Tensor<T>> inputs;
    for (const auto& blk : set.stages) {
        if (blk.count() == 0) continue;
        inputs.push_back(blk.centers);
        inputs.push_back(blk.scales);
        inputs.push_back(blk.rotations);
        inputs.push_back(blk.opacities);
        inputs.push_back(blk.sh);
    }
    Tensor<T> color = out.color;
    Tensor<T> alpha = out.alpha;
    detail::record_op<T>(
        "render", inputs, color,
        [state, color, alpha]() mutable {
            std::vector<int> contrib(size_t(color.numel() / 3));
            splat::project_and_bin(*state);
            splat::composite_forward(*state, color.ptr(), alpha.ptr(), contrib.data());
        },
        [state, color]() mutable {
            auto pix = splat::composite_backward(*state, color.grad().data());
            splat::parameter_backward(*state, pix);
        });
    return out;
}

/// Standalone analytic backward (for direct use outside a tape): seeds the
/// given upstream color gradient and accumulates into the set's tensors.
template <class T>
void render_backward(const GaussianSet<T>& set, const Intrinsics& intr, const Pose& pose,
                     const Tensor<T>& upstream_color_grad,
                     std::array<double, 3> background = {0, 0, 0}, const RenderConfig& cfg = {}) {
    check(upstream_color_grad.defined() &&
              upstream_color_grad.shape() == (Shape{intr.height, intr.width, 3}),
          "render_backward: upstream gradient must be [H,W,3] matching the camera");
    splat::RenderState<T> state;
    state.intr = intr;
    state.pose = pose;
    state.cfg = cfg;
    state.background = background;
    state.blocks = set.stages;
    splat::project_and_bin(state);
    auto pix = splat::composite_backward(state, upstream_color_grad.ptr());
    splat::parameter_backward(state, pix);
}

} // namespace hgs
