// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hgs {

/// Error type thrown by all contract violations in the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <class A, class... Rest>
void cat_into(std::ostringstream& os, const A& a, const Rest&... rest) {
    os << a;
    cat_into(os, rest...);
}
} // namespace detail

template <class... Args>
std::string cat(const Args&... args) {
    std::ostringstream os;
    detail::cat_into(os, args...);
    return os.str();
}

template <class... Args>
void check(bool cond, const Args&... args) {
    if (!cond) throw Error(cat(args...));
}

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

inline std::vector<int64_t> strides_of(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int i = int(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
    return st;
}

inline int normalize_axis(int axis, int rank) {
    int a = axis < 0 ? axis + rank : axis;
    check(a >= 0 && a < rank, "axis ", axis, " out of range for rank ", rank);
    return a;
}

/// Deterministic RNG. Normal variates use an explicit Box-Muller so the
/// stream does not depend on the standard library's distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t bits() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Derive an independent child stream (for per-module seeding).
    Rng fork() { return Rng(gen_() ^ 0x9e3779b97f4a7c15ull); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace hgs
