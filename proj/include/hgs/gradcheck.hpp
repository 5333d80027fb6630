// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/core/nn.hpp"

#include <functional>

namespace hgs {

struct FdReport {
    double max_rel = 0.0;    // worst relative mismatch seen
    double max_abs = 0.0;    // worst absolute mismatch seen
    int64_t checked = 0;     // number of entries compared
    std::string worst_site;  // "input#k[idx]" of the worst entry

    bool ok(double tol) const { return checked > 0 && max_rel < tol; }
};

namespace detail {

inline double rel_err(double a, double b, double floor_scale) {
    double scale = std::max(std::max(std::fabs(a), std::fabs(b)), floor_scale);
    return std::fabs(a - b) / scale;
}

} // namespace detail

/// Central finite differences against reverse-mode gradients.
///
/// `build_loss` must construct a fresh scalar loss from the given tensors
/// (reading their current data). Gradients are computed once with a tape;
/// each selected entry is then perturbed by ±h with the tape inactive.
/// `stride` > 1 checks every stride-th entry of each input.
template <class F>
FdReport check_gradients(std::vector<Tensor<double>> inputs, F build_loss, double h = 1e-5,
                         int64_t stride = 1, double floor_scale = 1e-6) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    Tape<double> tape;
    std::vector<std::vector<double>> analytic;
    {
        TapeScope<double> scope(tape);
        Tensor<double> loss = build_loss(inputs);
        check(loss.numel() == 1, "check_gradients: loss must be scalar");
        tape.backward(loss);
    }
    for (auto& t : inputs)
        analytic.push_back(t.has_grad() ? t.grad() : std::vector<double>(size_t(t.numel()), 0.0));

    auto eval = [&]() {
        Tensor<double> loss = build_loss(inputs);
        return loss.item();
    };

    FdReport rep;
    for (size_t k = 0; k < inputs.size(); ++k) {
        auto& t = inputs[k];
        double* d = t.ptr();
        for (int64_t i = 0; i < t.numel(); i += stride) {
            double keep = d[i];
            d[i] = keep + h;
            double up = eval();
            d[i] = keep - h;
            double dn = eval();
            d[i] = keep;
            double fd = (up - dn) / (2.0 * h);
            double an = analytic[k][size_t(i)];
            double re = detail::rel_err(fd, an, floor_scale);
            if (re > rep.max_rel) {
                rep.max_rel = re;
                rep.worst_site = cat("input#", k, "[", i, "]");
            }
            rep.max_abs = std::max(rep.max_abs, std::fabs(fd - an));
            ++rep.checked;
        }
    }
    return rep;
}

/// Directional derivative check: perturbs every listed parameter along one
/// random unit direction and compares (L(p+hv)-L(p-hv))/2h with <grad, v>.
/// One call exercises all parameters jointly.
template <class F>
FdReport check_directional(const std::vector<Tensor<double>>& params, F build_loss, Rng& rng,
                           double h = 1e-5, int directions = 3, double floor_scale = 1e-6) {
    std::vector<Tensor<double>> ps = params;
    for (auto& p : ps) p.set_requires_grad(true);

    FdReport rep;
    for (int it = 0; it < directions; ++it) {
        for (auto& p : ps) p.zero_grad();
        Tape<double> tape;
        {
            TapeScope<double> scope(tape);
            Tensor<double> loss = build_loss();
            check(loss.numel() == 1, "check_directional: loss must be scalar");
            tape.backward(loss);
        }
        std::vector<std::vector<double>> dirs;
        double norm2 = 0.0;
        for (auto& p : ps) {
            std::vector<double> v(size_t(p.numel()));
            for (auto& e : v) {
                e = rng.normal();
                norm2 += e * e;
            }
            dirs.push_back(std::move(v));
        }
        double inv = 1.0 / std::sqrt(norm2);
        double analytic = 0.0;
        for (size_t k = 0; k < ps.size(); ++k) {
            for (auto& e : dirs[k]) e *= inv;
            if (ps[k].has_grad()) {
                const auto& g = ps[k].grad();
                for (size_t i = 0; i < g.size(); ++i) analytic += g[i] * dirs[k][i];
            }
        }
        auto shift = [&](double sgn) {
            for (size_t k = 0; k < ps.size(); ++k) {
                double* d = ps[k].ptr();
                for (int64_t i = 0; i < ps[k].numel(); ++i) d[i] += sgn * h * dirs[k][size_t(i)];
            }
        };
        shift(+1.0);
        double up = build_loss().item();
        shift(-2.0);
        double dn = build_loss().item();
        shift(+1.0);
        double fd = (up - dn) / (2.0 * h);
        double re = detail::rel_err(fd, analytic, floor_scale);
        if (re > rep.max_rel) {
            rep.max_rel = re;
            rep.worst_site = cat("direction#", it);
        }
        rep.max_abs = std::max(rep.max_abs, std::fabs(fd - analytic));
        ++rep.checked;
    }
    return rep;
}

} // namespace hgs
