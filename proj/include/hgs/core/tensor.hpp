// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/core/common.hpp"

#include <functional>
#include <memory>
#include <utility>

namespace hgs {

template <class T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;        // empty until a backward pass touches it
    bool requires_grad = false; // leaf parameter flag
    bool graph_output = false;  // produced by a recorded op
};

/// Dense row-major tensor handle. Copies are shallow (shared storage);
/// recorded ops never mutate their inputs.
template <class T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;

    static Tensor zeros(Shape shape) {
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = std::move(shape);
        t.impl_->data.assign(size_t(numel_of(t.impl_->shape)), T(0));
        return t;
    }

    static Tensor full(Shape shape, T value) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<T> values) {
        check(numel_of(shape) == int64_t(values.size()), "tensor data length ",
              values.size(), " does not match shape ", shape_str(shape));
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(values);
        return t;
    }

    static Tensor scalar(T value) { return full({1}, value); }

    static Tensor rand_uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
        Tensor t = zeros(std::move(shape));
        for (auto& v : t.impl_->data) v = T(rng.uniform(lo, hi));
        return t;
    }

    static Tensor rand_normal(Shape shape, Rng& rng, double mean = 0.0, double stddev = 1.0) {
        Tensor t = zeros(std::move(shape));
        for (auto& v : t.impl_->data) v = T(rng.normal(mean, stddev));
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int rank() const { return int(impl_->shape.size()); }
    int64_t size(int axis) const { return impl_->shape[size_t(normalize_axis(axis, rank()))]; }
    int64_t numel() const { return int64_t(impl_->data.size()); }

    T* ptr() { return impl_->data.data(); }
    const T* ptr() const { return impl_->data.data(); }
    std::vector<T>& storage() { return impl_->data; }
    const std::vector<T>& storage() const { return impl_->data; }

    T item() const {
        check(numel() == 1, "item() on tensor with ", numel(), " elements");
        return impl_->data[0];
    }

    T at(std::initializer_list<int64_t> idx) const {
        check(int(idx.size()) == rank(), "at(): index rank mismatch");
        auto st = strides_of(impl_->shape);
        int64_t flat = 0;
        int d = 0;
        for (int64_t i : idx) flat += i * st[size_t(d++)];
        return impl_->data[size_t(flat)];
    }

    Tensor& set_requires_grad(bool v = true) {
        impl_->requires_grad = v;
        return *this;
    }
    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    bool is_graph_output() const { return impl_ && impl_->graph_output; }
    /// True when backward should deposit gradient here.
    bool wants_grad() const { return impl_ && (impl_->requires_grad || impl_->graph_output); }

    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    std::vector<T>& grad() {
        ensure_grad();
        return impl_->grad;
    }
    const std::vector<T>& grad() const {
        check(has_grad(), "tensor has no gradient");
        return impl_->grad;
    }
    void ensure_grad() {
        if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    }
    void zero_grad() { impl_->grad.clear(); }

    /// Value copy with no graph linkage.
    Tensor detach() const {
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = impl_->shape;
        t.impl_->data = impl_->data;
        return t;
    }

    bool same_impl(const Tensor& o) const { return impl_ == o.impl_; }
    TensorImpl<T>* impl() const { return impl_.get(); }
    void mark_graph_output() { impl_->graph_output = true; }

private:
    std::shared_ptr<TensorImpl<T>> impl_;
};

/// Recorded reverse-mode graph: primitive ops in execution order.
template <class T>
class Tape {
public:
    struct Node {
        const char* name;
        std::vector<Tensor<T>> inputs;
        Tensor<T> output;
        std::function<void()> replay;   // recompute output data from input data
        std::function<void()> backward; // accumulate into input grads from output grad
    };

    static Tape*& current() {
        thread_local Tape* tape = nullptr;
        return tape;
    }

    void record(Node node) { nodes_.push_back(std::move(node)); }

    size_t size() const { return nodes_.size(); }
    const Node& node(size_t i) const { return nodes_[i]; }
    void clear() { nodes_.clear(); }

    /// Re-executes every recorded forward kernel in order.
    void replay() {
        for (auto& n : nodes_)
            if (n.replay) n.replay();
    }

    /// Seeds `root`'s gradient with `seed` and walks nodes in reverse
    /// recorded order. Every wants_grad() input along the way accumulates.
    void backward(Tensor<T> root, const Tensor<T>& seed) {
        check(root.defined(), "backward: undefined root");
        check(seed.defined() && seed.shape() == root.shape(),
              "backward: seed shape ", seed.defined() ? shape_str(seed.shape()) : "(none)",
              " does not match output shape ", shape_str(root.shape()));
        auto& g = root.grad();
        const T* s = seed.ptr();
        for (size_t i = 0; i < g.size(); ++i) g[i] += s[i];
        for (size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (n.output.has_grad() && n.backward) n.backward();
        }
    }

    void backward(const Tensor<T>& root) {
        backward(root, Tensor<T>::full(root.shape(), T(1)));
    }

private:
    std::vector<Node> nodes_;
};

/// RAII guard installing a tape as the active recording target.
template <class T>
class TapeScope {
public:
    explicit TapeScope(Tape<T>& tape) : prev_(Tape<T>::current()) { Tape<T>::current() = &tape; }
    ~TapeScope() { Tape<T>::current() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape<T>* prev_;
};

namespace detail {

template <class T>
bool any_wants_grad(const std::vector<Tensor<T>>& inputs) {
    for (const auto& t : inputs)
        if (t.wants_grad()) return true;
    return false;
}

/// Registers a node on the active tape when the result participates in
/// differentiation; otherwise the op ran as a plain computation.
template <class T>
void record_op(const char* name, std::vector<Tensor<T>> inputs, Tensor<T> output,
               std::function<void()> replay, std::function<void()> backward) {
    Tape<T>* tape = Tape<T>::current();
    if (!tape || !any_wants_grad(inputs)) return;
    output.mark_graph_output();
    tape->record({name, std::move(inputs), std::move(output), std::move(replay), std::move(backward)});
}

/// dst.grad += src (elementwise), respecting wants_grad.
template <class T>
void add_grad(Tensor<T>& dst, const std::vector<T>& contribution) {
    if (!dst.wants_grad()) return;
    auto& g = dst.grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
}

} // namespace detail

} // namespace hgs
