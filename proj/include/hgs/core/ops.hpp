// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/core/tensor.hpp"
#include "hgs/core/thread_pool.hpp"

#include <array>

namespace hgs {

namespace detail {

/// Maps flat indices of an output shape onto a broadcast operand.
/// Right-aligned numpy rules, restricted to extents that match or are 1.
struct BroadcastMap {
    bool identity = false;
    int64_t suffix_mod = 0; // >0: src index = flat % suffix_mod
    std::vector<int64_t> out_strides;
    std::vector<int64_t> out_dims;
    std::vector<int64_t> src_strides; // 0 on broadcast axes

    int64_t operator()(int64_t flat) const {
        if (identity) return flat;
        if (suffix_mod > 0) return flat % suffix_mod;
        int64_t idx = 0;
        for (size_t d = 0; d < out_dims.size(); ++d)
            idx += ((flat / out_strides[d]) % out_dims[d]) * src_strides[d];
        return idx;
    }
};

inline BroadcastMap make_broadcast(const Shape& out, const Shape& src, const char* op) {
    check(src.size() <= out.size(), op, ": operand rank ", src.size(),
          " exceeds output rank ", out.size());
    BroadcastMap m;
    if (src == out) {
        m.identity = true;
        return m;
    }
    size_t off = out.size() - src.size();
    bool exact_suffix = true;
    for (size_t d = 0; d < src.size(); ++d) {
        check(src[d] == out[off + d] || src[d] == 1, op, ": operand shape ", shape_str(src),
              " does not broadcast to ", shape_str(out));
        if (src[d] != out[off + d]) exact_suffix = false;
    }
    if (exact_suffix) {
        m.suffix_mod = numel_of(src);
        return m;
    }
    m.out_strides = strides_of(out);
    m.out_dims = out;
    auto sst = strides_of(src);
    m.src_strides.assign(out.size(), 0);
    for (size_t d = 0; d < src.size(); ++d)
        if (src[d] != 1) m.src_strides[off + d] = sst[d];
    return m;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops (b broadcasts to a's shape)
// ---------------------------------------------------------------------------

namespace detail {

enum class BinKind { Add, Sub, Mul };

template <class T>
void bin_forward(BinKind kind, const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y,
                 const BroadcastMap& bm) {
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* py = y.ptr();
    int64_t n = a.numel();
    if (bm.identity) {
        switch (kind) {
        case BinKind::Add: for (int64_t i = 0; i < n; ++i) py[i] = pa[i] + pb[i]; break;
        case BinKind::Sub: for (int64_t i = 0; i < n; ++i) py[i] = pa[i] - pb[i]; break;
        case BinKind::Mul: for (int64_t i = 0; i < n; ++i) py[i] = pa[i] * pb[i]; break;
        }
        return;
    }
    for (int64_t i = 0; i < n; ++i) {
        T bv = pb[bm(i)];
        switch (kind) {
        case BinKind::Add: py[i] = pa[i] + bv; break;
        case BinKind::Sub: py[i] = pa[i] - bv; break;
        case BinKind::Mul: py[i] = pa[i] * bv; break;
        }
    }
}

template <class T>
Tensor<T> binary_op(BinKind kind, const char* name, Tensor<T> a, Tensor<T> b) {
    BroadcastMap bm = make_broadcast(a.shape(), b.shape(), name);
    Tensor<T> y = Tensor<T>::zeros(a.shape());
    bin_forward(kind, a, b, y, bm);
    record_op<T>(
        name, {a, b}, y,
        [kind, a, b, y, bm]() mutable { bin_forward(kind, a, b, y, bm); },
        [kind, a, b, y, bm]() mutable {
            const auto& g = y.grad();
            int64_t n = int64_t(g.size());
            if (a.wants_grad()) {
                auto& ga = a.grad();
                if (kind == BinKind::Mul) {
                    const T* pb = b.ptr();
                    for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * pb[bm(i)];
                } else {
                    for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
                }
            }
            if (b.wants_grad()) {
                auto& gb = b.grad();
                const T* pa = a.ptr();
                switch (kind) {
                case BinKind::Add: for (int64_t i = 0; i < n; ++i) gb[bm(i)] += g[i]; break;
                case BinKind::Sub: for (int64_t i = 0; i < n; ++i) gb[bm(i)] -= g[i]; break;
                case BinKind::Mul: for (int64_t i = 0; i < n; ++i) gb[bm(i)] += g[i] * pa[i]; break;
                }
            }
        });
    return y;
}

} // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(detail::BinKind::Add, "add", a, b);
}
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(detail::BinKind::Sub, "sub", a, b);
}
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(detail::BinKind::Mul, "mul", a, b);
}

template <class T>
Tensor<T> add_scalar(Tensor<T> x, T s) {
    Tensor<T> y = Tensor<T>::zeros(x.shape());
    const T* px = x.ptr();
    T* py = y.ptr();
    for (int64_t i = 0; i < x.numel(); ++i) py[i] = px[i] + s;
    detail::record_op<T>(
        "add_scalar", {x}, y,
        [x, y, s]() mutable {
            const T* px = x.ptr();
            T* py = y.ptr();
            for (int64_t i = 0; i < x.numel(); ++i) py[i] = px[i] + s;
        },
        [x, y]() mutable { detail::add_grad(x, y.grad()); });
    return y;
}

template <class T>
Tensor<T> mul_scalar(Tensor<T> x, T s) {
    Tensor<T> y = Tensor<T>::zeros(x.shape());
    const T* px = x.ptr();
    T* py = y.ptr();
    for (int64_t i = 0; i < x.numel(); ++i) py[i] = px[i] * s;
    detail::record_op<T>(
        "mul_scalar", {x}, y,
        [x, y, s]() mutable {
            const T* px = x.ptr();
            T* py = y.ptr();
            for (int64_t i = 0; i < x.numel(); ++i) py[i] = px[i] * s;
        },
        [x, y, s]() mutable {
            if (!x.wants_grad()) return;
            const auto& g = y.grad();
            auto& gx = x.grad();
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
        });
    return y;
}

template <class T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <class T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <class T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <class T> Tensor<T> operator+(const Tensor<T>& a, T s) { return add_scalar(a, s); }
template <class T> Tensor<T> operator*(const Tensor<T>& a, T s) { return mul_scalar(a, s); }
template <class T> Tensor<T> operator*(T s, const Tensor<T>& a) { return mul_scalar(a, s); }

// ---------------------------------------------------------------------------
// Unary elementwise ops
// ---------------------------------------------------------------------------

namespace detail {

template <class T, class F>
void unary_forward(const Tensor<T>& x, Tensor<T>& y, F f) {
    const T* px = x.ptr();
    T* py = y.ptr();
    for (int64_t i = 0; i < x.numel(); ++i) py[i] = f(px[i]);
}

/// df(x_value, y_value) -> local derivative.
template <class T, class F, class DF>
Tensor<T> unary_op(const char* name, Tensor<T> x, F f, DF df) {
    Tensor<T> y = Tensor<T>::zeros(x.shape());
    unary_forward(x, y, f);
    record_op<T>(
        name, {x}, y,
        [x, y, f]() mutable { unary_forward(x, y, f); },
        [x, y, df]() mutable {
            if (!x.wants_grad()) return;
            const auto& g = y.grad();
            auto& gx = x.grad();
            const T* px = x.ptr();
            const T* py = y.ptr();
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(px[i], py[i]);
        });
    return y;
}

template <class T>
T stable_sigmoid(T v) {
    if (v >= T(0)) {
        T e = std::exp(-v);
        return T(1) / (T(1) + e);
    }
    T e = std::exp(v);
    return e / (T(1) + e);
}

} // namespace detail

template <class T>
Tensor<T> abs(const Tensor<T>& x) {
    return detail::unary_op(
        "abs", x, [](T v) { return std::fabs(v); },
        [](T v, T) { return v < T(0) ? T(-1) : (v > T(0) ? T(1) : T(0)); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    return detail::unary_op(
        "relu", x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return detail::unary_op(
        "sigmoid", x, [](T v) { return detail::stable_sigmoid(v); },
        [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> softplus(const Tensor<T>& x) {
    return detail::unary_op(
        "softplus", x,
        [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::fabs(v))); },
        [](T v, T) { return detail::stable_sigmoid(v); });
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
    return detail::unary_op(
        "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
    return detail::unary_op(
        "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
Tensor<T> pow_scalar(const Tensor<T>& x, T p) {
    return detail::unary_op(
        "pow_scalar", x, [p](T v) { return std::pow(v, p); },
        [p](T v, T) { return p * std::pow(v, p - T(1)); });
}

template <class T>
Tensor<T> square(const Tensor<T>& x) {
    return mul(x, x);
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void softmax_forward(const Tensor<T>& x, Tensor<T>& y, int axis) {
    const auto& s = x.shape();
    int64_t outer = 1, inner = 1, dim = s[size_t(axis)];
    for (int d = 0; d < axis; ++d) outer *= s[size_t(d)];
    for (size_t d = size_t(axis) + 1; d < s.size(); ++d) inner *= s[d];
    const T* px = x.ptr();
    T* py = y.ptr();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
            int64_t base = o * dim * inner + in;
            T mx = px[base];
            for (int64_t a = 1; a < dim; ++a) mx = std::max(mx, px[base + a * inner]);
            T sum = T(0);
            for (int64_t a = 0; a < dim; ++a) {
                T e = std::exp(px[base + a * inner] - mx);
                py[base + a * inner] = e;
                sum += e;
            }
            T inv = T(1) / sum;
            for (int64_t a = 0; a < dim; ++a) py[base + a * inner] *= inv;
        }
}

} // namespace detail

/// Numerically stabilized softmax along `axis`.
template <class T>
Tensor<T> softmax(Tensor<T> x, int axis) {
    int ax = normalize_axis(axis, x.rank());
    Tensor<T> y = Tensor<T>::zeros(x.shape());
    detail::softmax_forward(x, y, ax);
    detail::record_op<T>(
        "softmax", {x}, y,
        [x, y, ax]() mutable { detail::softmax_forward(x, y, ax); },
        [x, y, ax]() mutable {
            if (!x.wants_grad()) return;
            const auto& s = x.shape();
            int64_t outer = 1, inner = 1, dim = s[size_t(ax)];
            for (int d = 0; d < ax; ++d) outer *= s[size_t(d)];
            for (size_t d = size_t(ax) + 1; d < s.size(); ++d) inner *= s[d];
            const auto& g = y.grad();
            auto& gx = x.grad();
            const T* py = y.ptr();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t in = 0; in < inner; ++in) {
                    int64_t base = o * dim * inner + in;
                    T dot = T(0);
                    for (int64_t a = 0; a < dim; ++a) {
                        int64_t i = base + a * inner;
                        dot += g[size_t(i)] * py[i];
                    }
                    for (int64_t a = 0; a < dim; ++a) {
                        int64_t i = base + a * inner;
                        gx[size_t(i)] += py[i] * (g[size_t(i)] - dot);
                    }
                }
        });
    return y;
}

// ---------------------------------------------------------------------------
// Layer norm (normalizes the last axis)
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void layer_norm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                        Tensor<T>& y, T eps) {
    int64_t dim = x.shape().back();
    int64_t rows = x.numel() / dim;
    const T* px = x.ptr();
    const T* pg = gamma.ptr();
    const T* pb = beta.ptr();
    T* py = y.ptr();
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = px + r * dim;
        T* yr = py + r * dim;
        T mu = T(0);
        for (int64_t d = 0; d < dim; ++d) mu += xr[d];
        mu /= T(dim);
        T var = T(0);
        for (int64_t d = 0; d < dim; ++d) {
            T c = xr[d] - mu;
            var += c * c;
        }
        var /= T(dim);
        T inv = T(1) / std::sqrt(var + eps);
        for (int64_t d = 0; d < dim; ++d) yr[d] = (xr[d] - mu) * inv * pg[d] + pb[d];
    }
}

} // namespace detail

template <class T>
Tensor<T> layer_norm(Tensor<T> x, Tensor<T> gamma, Tensor<T> beta, T eps = T(1e-5)) {
    int64_t dim = x.shape().back();
    check(gamma.numel() == dim && beta.numel() == dim,
          "layer_norm: gamma/beta length must be ", dim);
    Tensor<T> y = Tensor<T>::zeros(x.shape());
    detail::layer_norm_forward(x, gamma, beta, y, eps);
    detail::record_op<T>(
        "layer_norm", {x, gamma, beta}, y,
        [x, gamma, beta, y, eps]() mutable {
            detail::layer_norm_forward(x, gamma, beta, y, eps);
        },
        [x, gamma, beta, y, eps]() mutable {
            int64_t dim = x.shape().back();
            int64_t rows = x.numel() / dim;
            const auto& g = y.grad();
            const T* px = x.ptr();
            const T* pg = gamma.ptr();
            std::vector<T> xhat(static_cast<size_t>(dim), T(0));
            for (int64_t r = 0; r < rows; ++r) {
                const T* xr = px + r * dim;
                const T* gr = g.data() + r * dim;
                T mu = T(0);
                for (int64_t d = 0; d < dim; ++d) mu += xr[d];
                mu /= T(dim);
                T var = T(0);
                for (int64_t d = 0; d < dim; ++d) {
                    T c = xr[d] - mu;
                    var += c * c;
                }
                var /= T(dim);
                T inv = T(1) / std::sqrt(var + eps);
                for (int64_t d = 0; d < dim; ++d) xhat[size_t(d)] = (xr[d] - mu) * inv;
                if (gamma.wants_grad()) {
                    auto& gg = gamma.grad();
                    for (int64_t d = 0; d < dim; ++d) gg[size_t(d)] += gr[d] * xhat[size_t(d)];
                }
                if (beta.wants_grad()) {
                    auto& gb = beta.grad();
                    for (int64_t d = 0; d < dim; ++d) gb[size_t(d)] += gr[d];
                }
                if (x.wants_grad()) {
                    auto& gx = x.grad();
                    T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
                    for (int64_t d = 0; d < dim; ++d) {
                        T dxh = gr[d] * pg[d];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat[size_t(d)];
                    }
                    mean_dxhat /= T(dim);
                    mean_dxhat_xhat /= T(dim);
                    for (int64_t d = 0; d < dim; ++d) {
                        T dxh = gr[d] * pg[d];
                        gx[size_t(r * dim + d)] +=
                            inv * (dxh - mean_dxhat - xhat[size_t(d)] * mean_dxhat_xhat);
                    }
                }
            }
        });
    return y;
}

// ---------------------------------------------------------------------------
// Matmul (2D x 2D, or batched 3D x 3D)
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void matmul_forward(const T* a, const T* b, T* y, int64_t batch, int64_t m, int64_t k,
                    int64_t n) {
    parallel_ranges(
        batch * m,
        [&](int64_t row_b, int64_t row_e) {
            for (int64_t row = row_b; row < row_e; ++row) {
                int64_t bt = row / m, i = row % m;
                const T* ab = a + bt * m * k;
                const T* bb = b + bt * k * n;
                T* yr = y + row * n;
                for (int64_t j = 0; j < n; ++j) yr[j] = T(0);
                for (int64_t kk = 0; kk < k; ++kk) {
                    T av = ab[i * k + kk];
                    const T* br = bb + kk * n;
                    for (int64_t j = 0; j < n; ++j) yr[j] += av * br[j];
                }
            }
        },
        16);
}

} // namespace detail

template <class T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b) {
    check(a.rank() == b.rank() && (a.rank() == 2 || a.rank() == 3),
          "matmul: expected both 2D or both 3D, got ", shape_str(a.shape()), " x ",
          shape_str(b.shape()));
    int64_t batch = a.rank() == 3 ? a.shape()[0] : 1;
    int64_t m = a.shape()[a.rank() - 2], k = a.shape()[a.rank() - 1];
    int64_t kb = b.shape()[b.rank() - 2], n = b.shape()[b.rank() - 1];
    check(k == kb, "matmul: inner extents differ, ", shape_str(a.shape()), " x ",
          shape_str(b.shape()));
    check(a.rank() == 2 || a.shape()[0] == b.shape()[0], "matmul: batch extents differ");
    Shape ys = a.rank() == 3 ? Shape{batch, m, n} : Shape{m, n};
    Tensor<T> y = Tensor<T>::zeros(ys);
    detail::matmul_forward(a.ptr(), b.ptr(), y.ptr(), batch, m, k, n);
    detail::record_op<T>(
        "matmul", {a, b}, y,
        [a, b, y, batch, m, k, n]() mutable {
            detail::matmul_forward(a.ptr(), b.ptr(), y.ptr(), batch, m, k, n);
        },
        [a, b, y, batch, m, k, n]() mutable {
            const auto& g = y.grad();
            if (a.wants_grad()) {
                auto& ga = a.grad();
                const T* pb = b.ptr();
                for (int64_t bt = 0; bt < batch; ++bt)
                    for (int64_t i = 0; i < m; ++i) {
                        const T* gr = g.data() + (bt * m + i) * n;
                        T* gar = ga.data() + (bt * m + i) * k;
                        const T* bb = pb + bt * k * n;
                        for (int64_t kk = 0; kk < k; ++kk) {
                            T acc = T(0);
                            const T* br = bb + kk * n;
                            for (int64_t j = 0; j < n; ++j) acc += gr[j] * br[j];
                            gar[kk] += acc;
                        }
                    }
            }
            if (b.wants_grad()) {
                auto& gb = b.grad();
                const T* pa = a.ptr();
                for (int64_t bt = 0; bt < batch; ++bt)
                    for (int64_t kk = 0; kk < k; ++kk) {
                        T* gbr = gb.data() + (bt * k + kk) * n;
                        for (int64_t i = 0; i < m; ++i) {
                            T av = pa[(bt * m + i) * k + kk];
                            const T* gr = g.data() + (bt * m + i) * n;
                            for (int64_t j = 0; j < n; ++j) gbr[j] += av * gr[j];
                        }
                    }
            }
        });
    return y;
}

// ---------------------------------------------------------------------------
// Shape ops: reshape / transpose / concat / slice
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> reshape(Tensor<T> x, Shape shape) {
    check(numel_of(shape) == x.numel(), "reshape: ", shape_str(x.shape()), " -> ",
          shape_str(shape), " changes element count");
    Tensor<T> y = Tensor<T>::from_data(shape, x.storage());
    detail::record_op<T>(
        "reshape", {x}, y,
        [x, y]() mutable { std::copy(x.ptr(), x.ptr() + x.numel(), y.ptr()); },
        [x, y]() mutable { detail::add_grad(x, y.grad()); });
    return y;
}

namespace detail {

template <class T>
void transpose_forward(const Tensor<T>& x, Tensor<T>& y, const std::vector<int>& perm) {
    auto xs = strides_of(x.shape());
    auto ys = strides_of(y.shape());
    const auto& yd = y.shape();
    int rank = x.rank();
    const T* px = x.ptr();
    T* py = y.ptr();
    int64_t n = x.numel();
    for (int64_t f = 0; f < n; ++f) {
        int64_t xi = 0;
        for (int d = 0; d < rank; ++d)
            xi += ((f / ys[size_t(d)]) % yd[size_t(d)]) * xs[size_t(perm[size_t(d)])];
        py[f] = px[xi];
    }
}

} // namespace detail

template <class T>
Tensor<T> transpose(Tensor<T> x, std::vector<int> perm) {
    check(int(perm.size()) == x.rank(), "transpose: perm rank mismatch");
    Shape ys(perm.size());
    for (size_t d = 0; d < perm.size(); ++d) ys[d] = x.shape()[size_t(perm[d])];
    Tensor<T> y = Tensor<T>::zeros(ys);
    detail::transpose_forward(x, y, perm);
    detail::record_op<T>(
        "transpose", {x}, y,
        [x, y, perm]() mutable { detail::transpose_forward(x, y, perm); },
        [x, y, perm]() mutable {
            if (!x.wants_grad()) return;
            // Scatter through the same index map.
            auto xs = strides_of(x.shape());
            auto yst = strides_of(y.shape());
            const auto& yd = y.shape();
            int rank = x.rank();
            const auto& g = y.grad();
            auto& gx = x.grad();
            for (int64_t f = 0; f < y.numel(); ++f) {
                int64_t xi = 0;
                for (int d = 0; d < rank; ++d)
                    xi += ((f / yst[size_t(d)]) % yd[size_t(d)]) * xs[size_t(perm[size_t(d)])];
                gx[size_t(xi)] += g[size_t(f)];
            }
        });
    return y;
}

template <class T>
Tensor<T> concat(std::vector<Tensor<T>> parts, int axis) {
    check(!parts.empty(), "concat: no inputs");
    int ax = normalize_axis(axis, parts[0].rank());
    Shape ys = parts[0].shape();
    int64_t total = 0;
    for (const auto& p : parts) {
        check(p.rank() == parts[0].rank(), "concat: rank mismatch");
        for (int d = 0; d < p.rank(); ++d)
            check(d == ax || p.shape()[size_t(d)] == ys[size_t(d)],
                  "concat: shape mismatch at axis ", d, ": ", shape_str(p.shape()), " vs ",
                  shape_str(ys));
        total += p.shape()[size_t(ax)];
    }
    ys[size_t(ax)] = total;
    Tensor<T> y = Tensor<T>::zeros(ys);

    int64_t outer = 1, inner = 1;
    for (int d = 0; d < ax; ++d) outer *= ys[size_t(d)];
    for (size_t d = size_t(ax) + 1; d < ys.size(); ++d) inner *= ys[d];

    auto run_fwd = [outer, inner, total](const std::vector<Tensor<T>>& ps, Tensor<T>& out, int ax2) {
        T* py = out.ptr();
        int64_t off = 0;
        for (const auto& p : ps) {
            int64_t dim = p.shape()[size_t(ax2)];
            const T* pp = p.ptr();
            for (int64_t o = 0; o < outer; ++o)
                std::copy(pp + o * dim * inner, pp + (o + 1) * dim * inner,
                          py + (o * total + off) * inner);
            off += dim;
        }
    };
    run_fwd(parts, y, ax);
    detail::record_op<T>(
        "concat", parts, y,
        [parts, y, run_fwd, ax]() mutable { run_fwd(parts, y, ax); },
        [parts, y, outer, inner, total, ax]() mutable {
            const auto& g = y.grad();
            int64_t off = 0;
            for (auto p : parts) {
                int64_t dim = p.shape()[size_t(ax)];
                if (p.wants_grad()) {
                    auto& gp = p.grad();
                    for (int64_t o = 0; o < outer; ++o) {
                        const T* gs = g.data() + (o * total + off) * inner;
                        T* gd = gp.data() + o * dim * inner;
                        for (int64_t i = 0; i < dim * inner; ++i) gd[i] += gs[i];
                    }
                }
                off += dim;
            }
        });
    return y;
}

template <class T>
Tensor<T> slice(Tensor<T> x, int axis, int64_t begin, int64_t end) {
    int ax = normalize_axis(axis, x.rank());
    int64_t dim = x.shape()[size_t(ax)];
    check(begin >= 0 && end <= dim && begin < end, "slice: range [", begin, ",", end,
          ") invalid for extent ", dim);
    Shape ys = x.shape();
    ys[size_t(ax)] = end - begin;
    Tensor<T> y = Tensor<T>::zeros(ys);
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < ax; ++d) outer *= x.shape()[size_t(d)];
    for (size_t d = size_t(ax) + 1; d < x.shape().size(); ++d) inner *= x.shape()[d];
    int64_t len = end - begin;
    auto run_fwd = [=](const Tensor<T>& in, Tensor<T>& out) mutable {
        const T* px = in.ptr();
        T* py = out.ptr();
        for (int64_t o = 0; o < outer; ++o)
            std::copy(px + (o * dim + begin) * inner, px + (o * dim + end) * inner,
                      py + o * len * inner);
    };
    run_fwd(x, y);
    detail::record_op<T>(
        "slice", {x}, y,
        [x, y, run_fwd]() mutable { run_fwd(x, y); },
        [x, y, outer, inner, dim, begin, len]() mutable {
            if (!x.wants_grad()) return;
            const auto& g = y.grad();
            auto& gx = x.grad();
            for (int64_t o = 0; o < outer; ++o) {
                const T* gs = g.data() + o * len * inner;
                T* gd = gx.data() + (o * dim + begin) * inner;
                for (int64_t i = 0; i < len * inner; ++i) gd[i] += gs[i];
            }
        });
    return y;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace detail {

enum class ReduceKind { Sum, Mean, Max };

template <class T>
void reduce_forward(ReduceKind kind, const Tensor<T>& x, Tensor<T>& y, int ax) {
    const auto& s = x.shape();
    int64_t outer = 1, inner = 1, dim = s[size_t(ax)];
    for (int d = 0; d < ax; ++d) outer *= s[size_t(d)];
    for (size_t d = size_t(ax) + 1; d < s.size(); ++d) inner *= s[d];
    const T* px = x.ptr();
    T* py = y.ptr();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
            int64_t base = o * dim * inner + in;
            if (kind == ReduceKind::Max) {
                T best = px[base];
                for (int64_t a = 1; a < dim; ++a) best = std::max(best, px[base + a * inner]);
                py[o * inner + in] = best;
            } else {
                T acc = T(0);
                for (int64_t a = 0; a < dim; ++a) acc += px[base + a * inner];
                py[o * inner + in] = kind == ReduceKind::Mean ? acc / T(dim) : acc;
            }
        }
}

template <class T>
Tensor<T> reduce_op(ReduceKind kind, const char* name, Tensor<T> x, int axis, bool keepdims) {
    int ax = normalize_axis(axis, x.rank());
    Shape ys;
    for (int d = 0; d < x.rank(); ++d) {
        if (d == ax) {
            if (keepdims) ys.push_back(1);
        } else {
            ys.push_back(x.shape()[size_t(d)]);
        }
    }
    if (ys.empty()) ys.push_back(1);
    Tensor<T> y = Tensor<T>::zeros(ys);
    reduce_forward(kind, x, y, ax);
    record_op<T>(
        name, {x}, y,
        [kind, x, y, ax]() mutable { reduce_forward(kind, x, y, ax); },
        [kind, x, y, ax]() mutable {
            if (!x.wants_grad()) return;
            const auto& s = x.shape();
            int64_t outer = 1, inner = 1, dim = s[size_t(ax)];
            for (int d = 0; d < ax; ++d) outer *= s[size_t(d)];
            for (size_t d = size_t(ax) + 1; d < s.size(); ++d) inner *= s[d];
            const auto& g = y.grad();
            auto& gx = x.grad();
            const T* px = x.ptr();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t in = 0; in < inner; ++in) {
                    int64_t base = o * dim * inner + in;
                    T gv = g[size_t(o * inner + in)];
                    switch (kind) {
                    case ReduceKind::Sum:
                        for (int64_t a = 0; a < dim; ++a) gx[size_t(base + a * inner)] += gv;
                        break;
                    case ReduceKind::Mean: {
                        T gm = gv / T(dim);
                        for (int64_t a = 0; a < dim; ++a) gx[size_t(base + a * inner)] += gm;
                        break;
                    }
                    case ReduceKind::Max: {
                        // Grad routed to the first maximal element.
                        int64_t arg = 0;
                        T best = px[base];
                        for (int64_t a = 1; a < dim; ++a)
                            if (px[base + a * inner] > best) {
                                best = px[base + a * inner];
                                arg = a;
                            }
                        gx[size_t(base + arg * inner)] += gv;
                        break;
                    }
                    }
                }
        });
    return y;
}

} // namespace detail

template <class T>
Tensor<T> reduce_sum(const Tensor<T>& x, int axis, bool keepdims = false) {
    return detail::reduce_op(detail::ReduceKind::Sum, "reduce_sum", x, axis, keepdims);
}
template <class T>
Tensor<T> reduce_mean(const Tensor<T>& x, int axis, bool keepdims = false) {
    return detail::reduce_op(detail::ReduceKind::Mean, "reduce_mean", x, axis, keepdims);
}
template <class T>
Tensor<T> reduce_max(const Tensor<T>& x, int axis, bool keepdims = false) {
    return detail::reduce_op(detail::ReduceKind::Max, "reduce_max", x, axis, keepdims);
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    Tensor<T> flat = reshape(x, {x.numel()});
    return reduce_sum(flat, 0);
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& x) {
    Tensor<T> flat = reshape(x, {x.numel()});
    return reduce_mean(flat, 0);
}

// ---------------------------------------------------------------------------
// conv2d: NHWC input, [KH, KW, Cin, Cout] kernel, cross-correlation
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& k, Tensor<T>& y, int stride, int pad) {
    const auto& xs = x.shape();
    const auto& ks = k.shape();
    const auto& ys = y.shape();
    int64_t N = xs[0], H = xs[1], W = xs[2], Cin = xs[3];
    int64_t KH = ks[0], KW = ks[1], Cout = ks[3];
    int64_t OH = ys[1], OW = ys[2];
    const T* px = x.ptr();
    const T* pk = k.ptr();
    T* py = y.ptr();
    parallel_ranges(
        N * OH,
        [&](int64_t row_b, int64_t row_e) {
            std::vector<T> acc(static_cast<size_t>(Cout), T(0));
            for (int64_t row = row_b; row < row_e; ++row) {
                int64_t n = row / OH, oy = row % OH;
                for (int64_t ox = 0; ox < OW; ++ox) {
                    std::fill(acc.begin(), acc.end(), T(0));
                    for (int64_t ky = 0; ky < KH; ++ky) {
                        int64_t iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int64_t kx = 0; kx < KW; ++kx) {
                            int64_t ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= W) continue;
                            const T* xin = px + ((n * H + iy) * W + ix) * Cin;
                            const T* kk = pk + (ky * KW + kx) * Cin * Cout;
                            for (int64_t ic = 0; ic < Cin; ++ic) {
                                T xv = xin[ic];
                                const T* kr = kk + ic * Cout;
                                for (int64_t oc = 0; oc < Cout; ++oc) acc[size_t(oc)] += xv * kr[oc];
                            }
                        }
                    }
                    T* yo = py + ((n * OH + oy) * OW + ox) * Cout;
                    std::copy(acc.begin(), acc.end(), yo);
                }
            }
        },
        1);
}

} // namespace detail

/// 2D cross-correlation over NHWC input with [KH,KW,Cin,Cout] kernel.
template <class T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> k, int stride = 1, int padding = 0) {
    check(x.rank() == 4, "conv2d: input must be NHWC, got ", shape_str(x.shape()));
    check(k.rank() == 4, "conv2d: kernel must be [KH,KW,Cin,Cout], got ", shape_str(k.shape()));
    const auto& xs = x.shape();
    const auto& ks = k.shape();
    check(ks[0] % 2 == 1 && ks[1] % 2 == 1, "conv2d: kernel extent must be odd, got ",
          shape_str(ks));
    check(ks[2] == xs[3], "conv2d: input has ", xs[3], " channels but kernel expects ", ks[2]);
    check(stride >= 1 && padding >= 0, "conv2d: invalid stride/padding");
    int64_t OH = (xs[1] + 2 * padding - ks[0]) / stride + 1;
    int64_t OW = (xs[2] + 2 * padding - ks[1]) / stride + 1;
    check(OH >= 1 && OW >= 1, "conv2d: output would be empty for input ", shape_str(xs));
    Tensor<T> y = Tensor<T>::zeros({xs[0], OH, OW, ks[3]});
    detail::conv2d_forward(x, k, y, stride, padding);
    detail::record_op<T>(
        "conv2d", {x, k}, y,
        [x, k, y, stride, padding]() mutable { detail::conv2d_forward(x, k, y, stride, padding); },
        [x, k, y, stride, padding]() mutable {
            const auto& xs = x.shape();
            const auto& ks = k.shape();
            const auto& ysh = y.shape();
            int64_t N = xs[0], H = xs[1], W = xs[2], Cin = xs[3];
            int64_t KH = ks[0], KW = ks[1], Cout = ks[3];
            int64_t OH = ysh[1], OW = ysh[2];
            const auto& g = y.grad();
            if (x.wants_grad()) {
                auto& gx = x.grad();
                const T* pk = k.ptr();
                parallel_ranges(
                    N * H,
                    [&](int64_t row_b, int64_t row_e) {
                        for (int64_t row = row_b; row < row_e; ++row) {
                            int64_t n = row / H, iy = row % H;
                            for (int64_t ix = 0; ix < W; ++ix) {
                                T* gxp = gx.data() + ((n * H + iy) * W + ix) * Cin;
                                for (int64_t ky = 0; ky < KH; ++ky) {
                                    int64_t t = iy + padding - ky;
                                    if (t < 0 || t % stride) continue;
                                    int64_t oy = t / stride;
                                    if (oy >= OH) continue;
                                    for (int64_t kx = 0; kx < KW; ++kx) {
                                        int64_t u = ix + padding - kx;
                                        if (u < 0 || u % stride) continue;
                                        int64_t ox = u / stride;
                                        if (ox >= OW) continue;
                                        const T* go = g.data() + ((n * OH + oy) * OW + ox) * Cout;
                                        const T* kk = pk + (ky * KW + kx) * Cin * Cout;
                                        for (int64_t ic = 0; ic < Cin; ++ic) {
                                            const T* kr = kk + ic * Cout;
                                            T acc = T(0);
                                            for (int64_t oc = 0; oc < Cout; ++oc)
                                                acc += go[oc] * kr[oc];
                                            gxp[ic] += acc;
                                        }
                                    }
                                }
                            }
                        }
                    },
                    1);
            }
            if (k.wants_grad()) {
                auto& gk = k.grad();
                const T* px = x.ptr();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t oy = 0; oy < OH; ++oy)
                        for (int64_t ox = 0; ox < OW; ++ox) {
                            const T* go = g.data() + ((n * OH + oy) * OW + ox) * Cout;
                            for (int64_t ky = 0; ky < KH; ++ky) {
                                int64_t iy = oy * stride - padding + ky;
                                if (iy < 0 || iy >= H) continue;
                                for (int64_t kx = 0; kx < KW; ++kx) {
                                    int64_t ix = ox * stride - padding + kx;
                                    if (ix < 0 || ix >= W) continue;
                                    const T* xin = px + ((n * H + iy) * W + ix) * Cin;
                                    T* gkk = gk.data() + (ky * KW + kx) * Cin * Cout;
                                    for (int64_t ic = 0; ic < Cin; ++ic) {
                                        T xv = xin[ic];
                                        T* gkr = gkk + ic * Cout;
                                        for (int64_t oc = 0; oc < Cout; ++oc)
                                            gkr[oc] += xv * go[oc];
                                    }
                                }
                            }
                        }
            }
        });
    return y;
}

// ---------------------------------------------------------------------------
// Bilinear resize (align_corners = false, edge clamp)
// ---------------------------------------------------------------------------

namespace detail {

struct ResizeTap {
    int64_t lo, hi;
    double w; // weight of hi; lo gets 1-w
};

inline ResizeTap resize_tap(int64_t out_i, int64_t in_dim, int64_t out_dim) {
    double src = (double(out_i) + 0.5) * double(in_dim) / double(out_dim) - 0.5;
    if (src < 0) src = 0;
    if (src > double(in_dim - 1)) src = double(in_dim - 1);
    int64_t lo = int64_t(std::floor(src));
    int64_t hi = std::min(lo + 1, in_dim - 1);
    return {lo, hi, src - double(lo)};
}

template <class T>
void bilinear_resize_forward(const Tensor<T>& x, Tensor<T>& y) {
    const auto& xs = x.shape();
    const auto& ys = y.shape();
    int64_t N = xs[0], H = xs[1], W = xs[2], C = xs[3];
    int64_t OH = ys[1], OW = ys[2];
    const T* px = x.ptr();
    T* py = y.ptr();
    std::vector<ResizeTap> tx(static_cast<size_t>(OW), ResizeTap{});
    for (int64_t i = 0; i < OW; ++i) tx[size_t(i)] = resize_tap(i, W, OW);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t oy = 0; oy < OH; ++oy) {
            ResizeTap ty = resize_tap(oy, H, OH);
            for (int64_t ox = 0; ox < OW; ++ox) {
                const ResizeTap& t = tx[size_t(ox)];
                const T* p00 = px + ((n * H + ty.lo) * W + t.lo) * C;
                const T* p01 = px + ((n * H + ty.lo) * W + t.hi) * C;
                const T* p10 = px + ((n * H + ty.hi) * W + t.lo) * C;
                const T* p11 = px + ((n * H + ty.hi) * W + t.hi) * C;
                T wy = T(ty.w), wx = T(t.w);
                T w00 = (T(1) - wy) * (T(1) - wx), w01 = (T(1) - wy) * wx;
                T w10 = wy * (T(1) - wx), w11 = wy * wx;
                T* yo = py + ((n * OH + oy) * OW + ox) * C;
                for (int64_t c = 0; c < C; ++c)
                    yo[c] = w00 * p00[c] + w01 * p01[c] + w10 * p10[c] + w11 * p11[c];
            }
        }
}

} // namespace detail

template <class T>
Tensor<T> bilinear_resize(Tensor<T> x, int64_t out_h, int64_t out_w) {
    check(x.rank() == 4, "bilinear_resize: input must be NHWC, got ", shape_str(x.shape()));
    check(out_h >= 1 && out_w >= 1, "bilinear_resize: output extents must be >= 1");
    const auto& xs = x.shape();
    Tensor<T> y = Tensor<T>::zeros({xs[0], out_h, out_w, xs[3]});
    detail::bilinear_resize_forward(x, y);
    detail::record_op<T>(
        "bilinear_resize", {x}, y,
        [x, y]() mutable { detail::bilinear_resize_forward(x, y); },
        [x, y]() mutable {
            if (!x.wants_grad()) return;
            const auto& xs = x.shape();
            const auto& ysh = y.shape();
            int64_t N = xs[0], H = xs[1], W = xs[2], C = xs[3];
            int64_t OH = ysh[1], OW = ysh[2];
            const auto& g = y.grad();
            auto& gx = x.grad();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t oy = 0; oy < OH; ++oy) {
                    detail::ResizeTap ty = detail::resize_tap(oy, H, OH);
                    for (int64_t ox = 0; ox < OW; ++ox) {
                        detail::ResizeTap t = detail::resize_tap(ox, W, OW);
                        T wy = T(ty.w), wx = T(t.w);
                        T w00 = (T(1) - wy) * (T(1) - wx), w01 = (T(1) - wy) * wx;
                        T w10 = wy * (T(1) - wx), w11 = wy * wx;
                        const T* go = g.data() + ((n * OH + oy) * OW + ox) * C;
                        T* g00 = gx.data() + ((n * H + ty.lo) * W + t.lo) * C;
                        T* g01 = gx.data() + ((n * H + ty.lo) * W + t.hi) * C;
                        T* g10 = gx.data() + ((n * H + ty.hi) * W + t.lo) * C;
                        T* g11 = gx.data() + ((n * H + ty.hi) * W + t.hi) * C;
                        for (int64_t c = 0; c < C; ++c) {
                            g00[c] += w00 * go[c];
                            g01[c] += w01 * go[c];
                            g10[c] += w10 * go[c];
                            g11[c] += w11 * go[c];
                        }
                    }
                }
        });
    return y;
}

// ---------------------------------------------------------------------------
// Bilinear sampling at arbitrary coordinates (zero outside the source)
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void bilinear_sample_forward(const Tensor<T>& src, const Tensor<T>& coords, Tensor<T>& y) {
    const auto& ss = src.shape();
    int64_t H = ss[0], W = ss[1], C = ss[2];
    int64_t M = coords.numel() / 2;
    const T* ps = src.ptr();
    const T* pc = coords.ptr();
    T* py = y.ptr();
    for (int64_t m = 0; m < M; ++m) {
        double cx = double(pc[m * 2 + 0]);
        double cy = double(pc[m * 2 + 1]);
        int64_t x0 = int64_t(std::floor(cx));
        int64_t y0 = int64_t(std::floor(cy));
        T wx = T(cx - double(x0)), wy = T(cy - double(y0));
        T* yo = py + m * C;
        std::fill(yo, yo + C, T(0));
        const std::array<std::array<T, 2>, 2> w{{{(T(1) - wy) * (T(1) - wx), (T(1) - wy) * wx},
                                                 {wy * (T(1) - wx), wy * wx}}};
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                int64_t tx = x0 + dx, ty = y0 + dy;
                if (tx < 0 || tx >= W || ty < 0 || ty >= H) continue;
                T tw = w[size_t(dy)][size_t(dx)];
                if (tw == T(0)) continue;
                const T* sp = ps + (ty * W + tx) * C;
                for (int64_t c = 0; c < C; ++c) yo[c] += tw * sp[c];
            }
    }
}

} // namespace detail

/// Samples src [H,W,C] at continuous pixel coordinates coords [h,w,2]
/// ((x, y) order). Taps outside the source contribute zero. Differentiable
/// w.r.t. src; coords are treated as constants.
template <class T>
Tensor<T> bilinear_sample(Tensor<T> src, Tensor<T> coords) {
    check(src.rank() == 3, "bilinear_sample: src must be [H,W,C], got ", shape_str(src.shape()));
    check(coords.rank() == 3 && coords.shape()[2] == 2,
          "bilinear_sample: coords must be [h,w,2], got ", shape_str(coords.shape()));
    Shape ys{coords.shape()[0], coords.shape()[1], src.shape()[2]};
    Tensor<T> y = Tensor<T>::zeros(ys);
    detail::bilinear_sample_forward(src, coords, y);
    detail::record_op<T>(
        "bilinear_sample", {src, coords}, y,
        [src, coords, y]() mutable { detail::bilinear_sample_forward(src, coords, y); },
        [src, coords, y]() mutable {
            if (!src.wants_grad()) return;
            const auto& ss = src.shape();
            int64_t H = ss[0], W = ss[1], C = ss[2];
            int64_t M = coords.numel() / 2;
            const T* pc = coords.ptr();
            const auto& g = y.grad();
            auto& gs = src.grad();
            for (int64_t m = 0; m < M; ++m) {
                double cx = double(pc[m * 2 + 0]);
                double cy = double(pc[m * 2 + 1]);
                int64_t x0 = int64_t(std::floor(cx));
                int64_t y0 = int64_t(std::floor(cy));
                T wx = T(cx - double(x0)), wy = T(cy - double(y0));
                const std::array<std::array<T, 2>, 2> w{
                    {{(T(1) - wy) * (T(1) - wx), (T(1) - wy) * wx},
                     {wy * (T(1) - wx), wy * wx}}};
                const T* go = g.data() + m * C;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        int64_t tx = x0 + dx, ty = y0 + dy;
                        if (tx < 0 || tx >= W || ty < 0 || ty >= H) continue;
                        T tw = w[size_t(dy)][size_t(dx)];
                        if (tw == T(0)) continue;
                        T* gp = gs.data() + (ty * W + tx) * C;
                        for (int64_t c = 0; c < C; ++c) gp[c] += tw * go[c];
                    }
            }
        });
    return y;
}

// ---------------------------------------------------------------------------
// Composites
// ---------------------------------------------------------------------------

/// Multi-head scaled dot-product attention. q [B,Tq,E], k/v [B,Tk,E].
/// Projections live in the callers; this is the attention core.
template <class T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads) {
    check(q.rank() == 3 && k.rank() == 3 && v.rank() == 3, "attention: inputs must be rank 3");
    int64_t B = q.shape()[0], Tq = q.shape()[1], E = q.shape()[2];
    int64_t Tk = k.shape()[1];
    check(k.shape()[0] == B && v.shape()[0] == B, "attention: batch mismatch");
    check(k.shape()[2] == E && v.shape()[2] == E, "attention: embedding mismatch");
    check(v.shape()[1] == Tk, "attention: key/value token mismatch");
    check(heads >= 1 && E % heads == 0, "attention: embedding ", E, " not divisible by ", heads,
          " heads");
    int64_t dh = E / heads;
    auto split = [&](const Tensor<T>& t, int64_t tokens) {
        auto r = reshape(t, {B, tokens, heads, dh});
        auto p = transpose(r, {0, 2, 1, 3});
        return reshape(p, {B * heads, tokens, dh});
    };
    Tensor<T> qh = split(q, Tq), kh = split(k, Tk), vh = split(v, Tk);
    Tensor<T> scores = matmul(qh, transpose(kh, {0, 2, 1}));
    scores = mul_scalar(scores, T(1.0 / std::sqrt(double(dh))));
    Tensor<T> attn = softmax(scores, -1);
    Tensor<T> out = matmul(attn, vh);
    out = reshape(out, {B, heads, Tq, dh});
    out = transpose(out, {0, 2, 1, 3});
    return reshape(out, {B, Tq, E});
}

template <class T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.shape() == b.shape(), "mse: shape mismatch ", shape_str(a.shape()), " vs ",
          shape_str(b.shape()));
    return mean_all(square(sub(a, b)));
}

/// Mean pooling by an integer factor over H and W of an NHWC tensor.
template <class T>
Tensor<T> area_downsample(const Tensor<T>& x, int64_t factor) {
    if (factor == 1) return x;
    const auto& s = x.shape();
    check(x.rank() == 4 && s[1] % factor == 0 && s[2] % factor == 0,
          "area_downsample: extents ", shape_str(s), " not divisible by ", factor);
    int64_t N = s[0], Hb = s[1] / factor, Wb = s[2] / factor, C = s[3];
    Tensor<T> r = reshape(x, {N, Hb, factor, Wb, factor, C});
    r = reduce_mean(r, 2);       // [N,Hb,Wb,factor,C]
    return reduce_mean(r, 3);    // [N,Hb,Wb,C]
}

} // namespace hgs
