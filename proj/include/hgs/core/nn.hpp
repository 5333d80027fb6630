// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/core/ops.hpp"

#include <map>
#include <string>

namespace hgs {

/// Owns every learnable tensor of a model, in creation order. The order is
/// the canonical one for optimizer sweeps and checkpoint layout.
template <class T>
class ParamRegistry {
public:
    explicit ParamRegistry(uint64_t seed) : rng_(seed) {}

    Tensor<T> normal(const std::string& name, Shape shape, double stddev) {
        Tensor<T> t = Tensor<T>::rand_normal(shape, rng_, 0.0, stddev);
        return insert(name, std::move(t));
    }

    Tensor<T> constant(const std::string& name, Shape shape, T value) {
        return insert(name, Tensor<T>::full(std::move(shape), value));
    }

    Tensor<T> from_values(const std::string& name, Shape shape, std::vector<T> values) {
        return insert(name, Tensor<T>::from_data(std::move(shape), std::move(values)));
    }

    /// He-normal fan-in init for a [KH,KW,Cin,Cout] conv kernel.
    Tensor<T> conv_kernel(const std::string& name, int64_t kh, int64_t kw, int64_t cin,
                          int64_t cout, double gain = std::sqrt(2.0)) {
        double stddev = gain / std::sqrt(double(kh * kw * cin));
        return normal(name, {kh, kw, cin, cout}, stddev);
    }

    /// He-normal fan-in init for a [In,Out] linear weight.
    Tensor<T> linear_weight(const std::string& name, int64_t in, int64_t out,
                            double gain = std::sqrt(2.0)) {
        return normal(name, {in, out}, gain / std::sqrt(double(in)));
    }

    const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }

    Tensor<T>* find(const std::string& name) {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : &entries_[it->second].second;
    }

    int64_t total_parameters() const {
        int64_t n = 0;
        for (const auto& [_, t] : entries_) n += t.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [_, t] : entries_) t.zero_grad();
    }

    /// L2 norm over all parameter gradients (missing grads count as zero).
    double grad_norm() const {
        double acc = 0.0;
        for (const auto& [_, t] : entries_)
            if (t.has_grad())
                for (T g : t.grad()) acc += double(g) * double(g);
        return std::sqrt(acc);
    }

private:
    Tensor<T> insert(const std::string& name, Tensor<T> t) {
        check(index_.find(name) == index_.end(), "duplicate parameter name: ", name);
        t.set_requires_grad(true);
        index_[name] = entries_.size();
        entries_.emplace_back(name, t);
        return t;
    }

    std::vector<std::pair<std::string, Tensor<T>>> entries_;
    std::map<std::string, size_t> index_;
    Rng rng_;
};

template <class T>
struct Conv2dLayer {
    Tensor<T> w, b;
    int stride = 1;
    int pad = 0;

    Conv2dLayer() = default;
    Conv2dLayer(ParamRegistry<T>& reg, const std::string& name, int64_t cin, int64_t cout,
                int64_t ksize, int stride_ = 1, double gain = std::sqrt(2.0))
        : stride(stride_), pad(int(ksize / 2)) {
        w = reg.conv_kernel(name + ".w", ksize, ksize, cin, cout, gain);
        b = reg.constant(name + ".b", {cout}, T(0));
    }

    Tensor<T> operator()(const Tensor<T>& x) const { return add(conv2d(x, w, stride, pad), b); }
};

template <class T>
struct LinearLayer {
    Tensor<T> w, b;

    LinearLayer() = default;
    LinearLayer(ParamRegistry<T>& reg, const std::string& name, int64_t in, int64_t out,
                double gain = std::sqrt(2.0)) {
        w = reg.linear_weight(name + ".w", in, out, gain);
        b = reg.constant(name + ".b", {out}, T(0));
    }

    /// Applies to the last axis; leading axes are preserved.
    Tensor<T> operator()(const Tensor<T>& x) const {
        int64_t in = w.shape()[0], out = w.shape()[1];
        check(x.shape().back() == in, "linear: input width ", x.shape().back(), ", expected ", in);
        Shape lead(x.shape().begin(), x.shape().end() - 1);
        Tensor<T> flat = reshape(x, {x.numel() / in, in});
        Tensor<T> y = add(matmul(flat, w), b);
        lead.push_back(out);
        return reshape(y, lead);
    }
};

template <class T>
struct LayerNormLayer {
    Tensor<T> gamma, beta;

    LayerNormLayer() = default;
    LayerNormLayer(ParamRegistry<T>& reg, const std::string& name, int64_t dim) {
        gamma = reg.constant(name + ".gamma", {dim}, T(1));
        beta = reg.constant(name + ".beta", {dim}, T(0));
    }

    Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta); }
};

/// Adam over a registry's parameters, in registry order.
template <class T>
class Adam {
public:
    explicit Adam(ParamRegistry<T>& reg, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : reg_(reg), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& [_, t] : reg.entries())
            states_.push_back({std::vector<T>(size_t(t.numel()), T(0)),
                               std::vector<T>(size_t(t.numel()), T(0))});
    }

    void step(double lr) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, double(t_));
        double bc2 = 1.0 - std::pow(beta2_, double(t_));
        size_t idx = 0;
        for (const auto& [_, t] : reg_.entries()) {
            Tensor<T> p = t; // shared storage handle
            auto& st = states_[idx++];
            T* pd = p.ptr();
            const T* g = p.has_grad() ? p.grad().data() : nullptr;
            for (size_t i = 0; i < st.m.size(); ++i) {
                double gi = g ? double(g[i]) : 0.0;
                double m = beta1_ * double(st.m[i]) + (1.0 - beta1_) * gi;
                double v = beta2_ * double(st.v[i]) + (1.0 - beta2_) * gi * gi;
                st.m[i] = T(m);
                st.v[i] = T(v);
                double mhat = m / bc1, vhat = v / bc2;
                pd[i] = T(double(pd[i]) - lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    int64_t step_count() const { return t_; }

private:
    struct State {
        std::vector<T> m, v;
    };
    ParamRegistry<T>& reg_;
    std::vector<State> states_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

/// Linear warm-up to `peak`, then cosine decay to zero at `total` steps.
inline double lr_schedule(int64_t step, int64_t warmup, int64_t total, double peak) {
    if (total <= 0) return peak;
    if (warmup > 0 && step <= warmup) return peak * double(step) / double(warmup);
    if (step >= total) return 0.0;
    double t = double(step - warmup) / double(std::max<int64_t>(1, total - warmup));
    return peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

} // namespace hgs
