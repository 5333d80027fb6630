// SPDX-License-Identifier: Apache-2.0

// Unit tests for the dense tensor core and its reverse-mode gradients.
// Every differentiable primitive is checked against central finite
// differences in float64.

#include "hgs/core/nn.hpp"
#include "hgs/gradcheck.hpp"

#include <gtest/gtest.h>

using namespace hgs;
using DT = Tensor<double>;

namespace {

constexpr double kFdTol = 1e-6;

DT random_tensor(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    return DT::rand_uniform(std::move(shape), rng, lo, hi);
}

/// Random tensor with entries kept away from zero (for |x|, relu kinks).
DT random_tensor_offzero(Shape shape, uint64_t seed, double margin = 0.05) {
    Rng rng(seed);
    DT t = DT::zeros(std::move(shape));
    for (auto& v : t.storage()) {
        double u = rng.uniform(-1.0, 1.0);
        v = u >= 0 ? u + margin : u - margin;
    }
    return t;
}

} // namespace

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

TEST(Conv2d, IdentityKernel) {
    DT x = random_tensor({1, 5, 5, 3}, 1);
    DT k = DT::zeros({1, 1, 3, 3});
    for (int c = 0; c < 3; ++c) k.storage()[size_t(c * 3 + c)] = 1.0;
    DT y = conv2d(x, k, 1, 0);
    ASSERT_EQ(y.shape(), x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(y.ptr()[i], x.ptr()[i]);
}

TEST(Conv2d, OnesKernelOnConstant) {
    const double c = 0.37;
    DT x = DT::full({1, 6, 6, 1}, c);
    DT k = DT::full({3, 3, 1, 1}, 1.0);
    DT y = conv2d(x, k, 1, 1);
    // Interior pixels see the full 3x3 window.
    EXPECT_NEAR(y.at({0, 3, 3, 0}), 9.0 * c, 1e-12);
    // Corner sees only 4 taps.
    EXPECT_NEAR(y.at({0, 0, 0, 0}), 4.0 * c, 1e-12);
}

TEST(Conv2d, GradCheck) {
    DT x = random_tensor({1, 4, 4, 2}, 2);
    DT k = random_tensor({3, 3, 2, 3}, 3);
    auto rep = check_gradients(
        {x, k},
        [](const std::vector<DT>& in) {
            DT y = conv2d(in[0], in[1], 1, 1);
            return sum_all(square(y));
        });
    EXPECT_LT(rep.max_rel, kFdTol) << rep.worst_site;
}

TEST(Conv2d, StridedGradCheck) {
    DT x = random_tensor({2, 6, 6, 2}, 4);
    DT k = random_tensor({3, 3, 2, 2}, 5);
    auto rep = check_gradients(
        {x, k},
        [](const std::vector<DT>& in) {
            DT y = conv2d(in[0], in[1], 2, 1);
            return mean_all(square(y));
        });
    EXPECT_LT(rep.max_rel, kFdTol) << rep.worst_site;
}

TEST(Conv2d, RejectsShapeMismatch) {
    DT x = random_tensor({1, 4, 4, 2}, 6);
    DT k = random_tensor({3, 3, 5, 4}, 7); // 5 != 2 input channels
    EXPECT_THROW(conv2d(x, k, 1, 1), Error);
    DT even = random_tensor({2, 2, 2, 2}, 8);
    EXPECT_THROW(conv2d(x, even, 1, 0), Error);
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

TEST(Softmax, UniformLogits) {
    const int R = 7;
    DT x = DT::full({R}, 1.234);
    DT y = softmax(x, 0);
    for (int i = 0; i < R; ++i) EXPECT_NEAR(y.ptr()[i], 1.0 / R, 1e-15);
}

TEST(Softmax, SaturatedPair) {
    DT x = DT::from_data({2}, {30.0, -30.0});
    DT y = softmax(x, 0);
    EXPECT_NEAR(y.ptr()[0], 1.0, 1e-12);
    EXPECT_NEAR(y.ptr()[1], 0.0, 1e-12);
}

TEST(Softmax, SumsToOneAndGrad) {
    DT x = random_tensor({3, 9}, 11, -5.0, 5.0);
    DT y = softmax(x, 1);
    for (int r = 0; r < 3; ++r) {
        double s = 0;
        for (int c = 0; c < 9; ++c) s += y.at({r, c});
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    // Weighted sum keeps the softmax backward nontrivial.
    DT w = random_tensor({3, 9}, 12);
    auto rep = check_gradients(
        {x}, [&](const std::vector<DT>& in) { return sum_all(mul(softmax(in[0], 1), w)); });
    EXPECT_LT(rep.max_rel, kFdTol) << rep.worst_site;
}

// ---------------------------------------------------------------------------
// bilinear_resize
// ---------------------------------------------------------------------------

TEST(BilinearResize, SameSizeIsIdentity) {
    DT x = random_tensor({2, 5, 7, 3}, 13);
    DT y = bilinear_resize(x, 5, 7);
    for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.ptr()[i], x.ptr()[i]);
}

TEST(BilinearResize, ConstantStaysConstant) {
    DT x = DT::full({1, 3, 3, 2}, 0.625);
    DT y = bilinear_resize(x, 9, 5);
    for (int64_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y.ptr()[i], 0.625, 1e-12);
}

TEST(BilinearResize, CheckerboardUpsampleOracle) {
    // 2x2 checkerboard (0,1;1,0) to 4x4, align-corners false:
    // source coordinate for output i is clamp((i+0.5)/2 - 0.5, 0, 1).
    DT x = DT::from_data({1, 2, 2, 1}, {0.0, 1.0, 1.0, 0.0});
    DT y = bilinear_resize(x, 4, 4);
    auto axis_w = [](int i) {
        double src = (i + 0.5) * 0.5 - 0.5;
        src = std::clamp(src, 0.0, 1.0);
        return src; // weight of the hi tap (index 1)
    };
    auto checker = [](int r, int c) { return double((r + c) % 2 != 0); };
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            double wy = axis_w(r), wx = axis_w(c);
            double expect = (1 - wy) * (1 - wx) * checker(0, 0) + (1 - wy) * wx * checker(0, 1) +
                            wy * (1 - wx) * checker(1, 0) + wy * wx * checker(1, 1);
            EXPECT_NEAR(y.at({0, r, c, 0}), expect, 1e-12) << "(" << r << "," << c << ")";
        }
}

TEST(BilinearResize, GradCheck) {
    DT x = random_tensor({1, 3, 4, 2}, 14);
    DT w = random_tensor({1, 5, 7, 2}, 15);
    auto rep = check_gradients({x}, [&](const std::vector<DT>& in) {
        return sum_all(mul(bilinear_resize(in[0], 5, 7), w));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << rep.worst_site;
}

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

TEST(Attention, SingleKeyValueToken) {
    DT q = random_tensor({1, 3, 4}, 16);
    DT k = random_tensor({1, 1, 4}, 17);
    DT v = random_tensor({1, 1, 4}, 18);
    DT y = attention(q, k, v, 2);
    // Softmax over one key is 1 regardless of q: every output row equals v.
    for (int t = 0; t < 3; ++t)
        for (int e = 0; e < 4; ++e) EXPECT_NEAR(y.at({0, t, e}), v.at({0, 0, e}), 1e-12);
}

TEST(Attention, DominantKeyWins) {
    // One key matches the query with a logit margin > 30.
    DT q = DT::from_data({1, 1, 2}, {100.0, 0.0});
    DT k = DT::from_data({1, 2, 2}, {1.0, 0.0, 0.0, 1.0});
    DT v = DT::from_data({1, 2, 2}, {7.0, -3.0, 2.0, 5.0});
    DT y = attention(q, k, v, 1);
    EXPECT_NEAR(y.at({0, 0, 0}), 7.0, 1e-9);
    EXPECT_NEAR(y.at({0, 0, 1}), -3.0, 1e-9);
}

TEST(Attention, WeightsSumToOneAndGrad) {
    // Values constant across tokens: any convex combination returns the
    // constant, which holds iff attention weights sum to 1 per query.
    DT q = random_tensor({2, 3, 8}, 19);
    DT k = random_tensor({2, 5, 8}, 20);
    DT v = DT::zeros({2, 5, 8});
    for (int b = 0; b < 2; ++b)
        for (int t = 0; t < 5; ++t)
            for (int e = 0; e < 8; ++e) v.storage()[size_t((b * 5 + t) * 8 + e)] = 0.1 * e + b;
    DT y = attention(q, k, v, 4);
    for (int b = 0; b < 2; ++b)
        for (int t = 0; t < 3; ++t)
            for (int e = 0; e < 8; ++e) EXPECT_NEAR(y.at({b, t, e}), 0.1 * e + b, 1e-12);

    DT qr = random_tensor({1, 2, 4}, 21);
    DT kr = random_tensor({1, 3, 4}, 22);
    DT vr = random_tensor({1, 3, 4}, 23);
    auto rep = check_gradients({qr, kr, vr}, [](const std::vector<DT>& in) {
        return sum_all(square(attention(in[0], in[1], in[2], 2)));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << rep.worst_site;
}

TEST(Attention, RejectsIndivisibleHeads) {
    DT q = random_tensor({1, 2, 6}, 24);
    EXPECT_THROW(attention(q, q, q, 4), Error);
}

// ---------------------------------------------------------------------------
// backward / tape
// ---------------------------------------------------------------------------

TEST(Backward, IdentityGradIsOne) {
    DT x = random_tensor({4}, 25);
    x.set_requires_grad(true);
    Tape<double> tape;
    TapeScope<double> scope(tape);
    tape.backward(x);
    for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Backward, SumOfSquares) {
    DT x = random_tensor({6}, 26);
    x.set_requires_grad(true);
    Tape<double> tape;
    {
        TapeScope<double> scope(tape);
        DT loss = sum_all(square(x));
        tape.backward(loss);
    }
    for (int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(x.grad()[size_t(i)], 2.0 * x.ptr()[i], 1e-12);
}

TEST(Backward, RejectsSeedShapeMismatch) {
    DT x = random_tensor({3}, 27);
    x.set_requires_grad(true);
    Tape<double> tape;
    TapeScope<double> scope(tape);
    DT y = mul_scalar(x, 2.0);
    EXPECT_THROW(tape.backward(y, DT::zeros({4})), Error);
}

TEST(Tape, TopologicalOrderAndReplay) {
    DT x = random_tensor({3, 3}, 28);
    x.set_requires_grad(true);
    Tape<double> tape;
    TapeScope<double> scope(tape);
    DT a = sigmoid(x);
    DT b = mul(a, a);
    DT c = sum_all(b);
    (void)c;
    ASSERT_GE(tape.size(), 3u);
    // Inputs of every node must appear earlier (as an output or as a leaf).
    std::vector<const void*> seen;
    seen.push_back(x.impl());
    for (size_t i = 0; i < tape.size(); ++i) {
        const auto& n = tape.node(i);
        for (const auto& in : n.inputs) {
            bool found = std::find(seen.begin(), seen.end(), (const void*)in.impl()) != seen.end();
            EXPECT_TRUE(found || !in.is_graph_output()) << "node " << i << " (" << n.name << ")";
        }
        seen.push_back(n.output.impl());
    }
    // Replay must reproduce recorded outputs bit-identically.
    std::vector<std::vector<double>> saved;
    for (size_t i = 0; i < tape.size(); ++i) saved.push_back(tape.node(i).output.storage());
    tape.replay();
    for (size_t i = 0; i < tape.size(); ++i) {
        const auto& now = tape.node(i).output.storage();
        ASSERT_EQ(now.size(), saved[i].size());
        for (size_t j = 0; j < now.size(); ++j) EXPECT_EQ(now[j], saved[i][j]);
    }
    // After mutating the leaf, replay propagates the change.
    x.ptr()[0] += 0.25;
    tape.replay();
    EXPECT_NE(tape.node(0).output.storage()[0], saved[0][0]);
}

TEST(Tape, DeterministicAcrossRuns) {
    auto run = [](uint64_t seed) {
        DT x = random_tensor({2, 8, 8, 3}, seed);
        DT k = random_tensor({3, 3, 3, 4}, seed + 1);
        x.set_requires_grad(true);
        k.set_requires_grad(true);
        Tape<double> tape;
        TapeScope<double> scope(tape);
        DT y = relu(conv2d(x, k, 1, 1));
        DT loss = mean_all(square(y));
        tape.backward(loss);
        std::vector<double> out = y.storage();
        out.insert(out.end(), x.grad().begin(), x.grad().end());
        out.insert(out.end(), k.grad().begin(), k.grad().end());
        return out;
    };
    auto a = run(77), b = run(77);
    ASSERT_EQ(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

// ---------------------------------------------------------------------------
// remaining primitives: elementwise, matmul, shape ops, reductions, norm
// ---------------------------------------------------------------------------

TEST(Elementwise, GradChecks) {
    DT x = random_tensor_offzero({3, 5}, 30);
    struct Case {
        const char* name;
        std::function<DT(const DT&)> f;
    };
    std::vector<Case> cases = {
        {"abs", [](const DT& t) { return abs(t); }},
        {"relu", [](const DT& t) { return relu(t); }},
        {"sigmoid", [](const DT& t) { return sigmoid(t); }},
        {"softplus", [](const DT& t) { return softplus(t); }},
        {"exp", [](const DT& t) { return exp(t); }},
        {"square", [](const DT& t) { return square(t); }},
        {"add_scalar", [](const DT& t) { return add_scalar(t, 0.7); }},
        {"mul_scalar", [](const DT& t) { return mul_scalar(t, -1.3); }},
    };
    for (auto& c : cases) {
        auto rep = check_gradients(
            {x}, [&](const std::vector<DT>& in) { return sum_all(square(c.f(in[0]))); });
        EXPECT_LT(rep.max_rel, kFdTol) << c.name << " @ " << rep.worst_site;
    }
    DT pos = random_tensor({3, 5}, 31, 0.2, 2.0);
    auto rep = check_gradients(
        {pos}, [](const std::vector<DT>& in) { return sum_all(square(log(in[0]))); });
    EXPECT_LT(rep.max_rel, kFdTol) << "log @ " << rep.worst_site;
    rep = check_gradients(
        {pos}, [](const std::vector<DT>& in) { return sum_all(pow_scalar(in[0], 1.7)); });
    EXPECT_LT(rep.max_rel, kFdTol) << "pow @ " << rep.worst_site;
}

TEST(Elementwise, BroadcastAddMulGrad) {
    DT a = random_tensor({2, 3, 4}, 32);
    DT bias = random_tensor({4}, 33);           // suffix broadcast
    DT col = random_tensor({3, 1}, 34);         // mixed broadcast
    auto rep = check_gradients({a, bias}, [](const std::vector<DT>& in) {
        return sum_all(square(add(in[0], in[1])));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << "bias add @ " << rep.worst_site;
    rep = check_gradients({a, col}, [](const std::vector<DT>& in) {
        return sum_all(square(mul(in[0], in[1])));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << "col mul @ " << rep.worst_site;
    rep = check_gradients({a, bias}, [](const std::vector<DT>& in) {
        return sum_all(square(sub(in[0], in[1])));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << "bias sub @ " << rep.worst_site;
}

TEST(Matmul, ForwardAndGrad) {
    DT a = DT::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    DT b = DT::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
    DT y = matmul(a, b);
    EXPECT_DOUBLE_EQ(y.at({0, 0}), 58.0);
    EXPECT_DOUBLE_EQ(y.at({0, 1}), 64.0);
    EXPECT_DOUBLE_EQ(y.at({1, 0}), 139.0);
    EXPECT_DOUBLE_EQ(y.at({1, 1}), 154.0);
    DT ar = random_tensor({4, 3}, 35), br = random_tensor({3, 5}, 36);
    auto rep = check_gradients({ar, br}, [](const std::vector<DT>& in) {
        return sum_all(square(matmul(in[0], in[1])));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << rep.worst_site;
    DT a3 = random_tensor({2, 3, 4}, 37), b3 = random_tensor({2, 4, 2}, 38);
    rep = check_gradients({a3, b3}, [](const std::vector<DT>& in) {
        return sum_all(square(matmul(in[0], in[1])));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << "batched @ " << rep.worst_site;
}

TEST(ShapeOps, GradChecks) {
    DT x = random_tensor({2, 3, 4}, 39);
    DT y2 = random_tensor({2, 2, 4}, 40);
    auto rep = check_gradients({x}, [](const std::vector<DT>& in) {
        return sum_all(square(reshape(in[0], {4, 6})));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << "reshape";
    rep = check_gradients({x}, [](const std::vector<DT>& in) {
        return sum_all(square(transpose(in[0], {2, 0, 1})));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << "transpose";
    rep = check_gradients({x, y2}, [](const std::vector<DT>& in) {
        return sum_all(square(concat<double>({in[0], in[1]}, 1)));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << "concat";
    rep = check_gradients({x}, [](const std::vector<DT>& in) {
        return sum_all(square(slice(in[0], 1, 1, 3)));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << "slice";
}

TEST(Transpose, RoundTripIsIdentity) {
    DT x = random_tensor({2, 3, 4, 5}, 41);
    DT y = transpose(transpose(x, {0, 2, 1, 3}), {0, 2, 1, 3});
    for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.ptr()[i], x.ptr()[i]);
}

TEST(Reductions, ValuesAndGrads) {
    DT x = DT::from_data({2, 3}, {1, 5, 3, 2, 4, 6});
    EXPECT_DOUBLE_EQ(reduce_sum(x, 1).at({0}), 9.0);
    EXPECT_DOUBLE_EQ(reduce_mean(x, 0).at({1}), 4.5);
    EXPECT_DOUBLE_EQ(reduce_max(x, 1).at({0}), 5.0);
    EXPECT_DOUBLE_EQ(reduce_max(x, 1).at({1}), 6.0);
    EXPECT_DOUBLE_EQ(sum_all(x).item(), 21.0);
    EXPECT_DOUBLE_EQ(mean_all(x).item(), 3.5);

    DT xr = random_tensor({3, 4, 2}, 42);
    for (int axis = 0; axis < 3; ++axis) {
        auto rep = check_gradients({xr}, [axis](const std::vector<DT>& in) {
            return sum_all(square(reduce_sum(in[0], axis)));
        });
        EXPECT_LT(rep.max_rel, kFdTol) << "sum axis " << axis;
        rep = check_gradients({xr}, [axis](const std::vector<DT>& in) {
            return sum_all(square(reduce_mean(in[0], axis, true)));
        });
        EXPECT_LT(rep.max_rel, kFdTol) << "mean axis " << axis;
        rep = check_gradients({xr}, [axis](const std::vector<DT>& in) {
            return sum_all(square(reduce_max(in[0], axis)));
        });
        EXPECT_LT(rep.max_rel, kFdTol) << "max axis " << axis;
    }
}

TEST(LayerNorm, NormalizesAndGrads) {
    DT x = random_tensor({4, 6}, 43);
    DT gamma = DT::full({6}, 1.0);
    DT beta = DT::zeros({6});
    DT y = layer_norm(x, gamma, beta);
    for (int r = 0; r < 4; ++r) {
        double mu = 0, var = 0;
        for (int c = 0; c < 6; ++c) mu += y.at({r, c});
        mu /= 6;
        for (int c = 0; c < 6; ++c) var += (y.at({r, c}) - mu) * (y.at({r, c}) - mu);
        var /= 6;
        EXPECT_NEAR(mu, 0.0, 1e-12);
        EXPECT_NEAR(var, 1.0, 5e-3); // eps offsets the variance slightly
    }
    DT g = random_tensor({6}, 44, 0.5, 1.5), b = random_tensor({6}, 45);
    auto rep = check_gradients({x, g, b}, [](const std::vector<DT>& in) {
        return sum_all(square(layer_norm(in[0], in[1], in[2])));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << rep.worst_site;
}

TEST(BilinearSample, ZeroOutsideAndGrad) {
    DT src = random_tensor({4, 5, 2}, 46);
    // One in-bounds integer tap, one interpolated, one fully outside.
    DT coords = DT::from_data({1, 3, 2}, {2.0, 1.0, 2.5, 1.5, -7.0, 9.0});
    DT y = bilinear_sample(src, coords);
    EXPECT_DOUBLE_EQ(y.at({0, 0, 0}), src.at({1, 2, 0}));
    double expect = 0.25 * (src.at({1, 2, 1}) + src.at({1, 3, 1}) + src.at({2, 2, 1}) +
                            src.at({2, 3, 1}));
    EXPECT_NEAR(y.at({0, 1, 1}), expect, 1e-12);
    EXPECT_DOUBLE_EQ(y.at({0, 2, 0}), 0.0);
    EXPECT_DOUBLE_EQ(y.at({0, 2, 1}), 0.0);

    auto rep = check_gradients({src}, [&](const std::vector<DT>& in) {
        return sum_all(square(bilinear_sample(in[0], coords)));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << rep.worst_site;
}

TEST(AreaDownsample, AveragesBlocks) {
    DT x = DT::from_data({1, 2, 4, 1}, {1, 2, 3, 4, 5, 6, 7, 8});
    DT y = area_downsample(x, 2);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 1}));
    EXPECT_DOUBLE_EQ(y.at({0, 0, 0, 0}), (1 + 2 + 5 + 6) / 4.0);
    EXPECT_DOUBLE_EQ(y.at({0, 0, 1, 0}), (3 + 4 + 7 + 8) / 4.0);
    DT xr = random_tensor({2, 4, 4, 3}, 47);
    auto rep = check_gradients({xr}, [](const std::vector<DT>& in) {
        return sum_all(square(area_downsample(in[0], 2)));
    });
    EXPECT_LT(rep.max_rel, kFdTol) << rep.worst_site;
}

TEST(Optimizer, AdamAndSchedule) {
    // Minimize (p - 3)^2; Adam should converge close to 3.
    ParamRegistry<double> reg(5);
    DT p = reg.constant("p", {1}, 0.0);
    Adam<double> opt(reg);
    for (int i = 0; i < 400; ++i) {
        reg.zero_grad();
        Tape<double> tape;
        TapeScope<double> scope(tape);
        DT loss = square(add_scalar(p, -3.0));
        tape.backward(loss);
        opt.step(0.1);
    }
    EXPECT_NEAR(p.item(), 3.0, 1e-3);

    EXPECT_DOUBLE_EQ(lr_schedule(0, 2000, 10000, 2e-4), 0.0);
    EXPECT_DOUBLE_EQ(lr_schedule(2000, 2000, 10000, 2e-4), 2e-4);
    EXPECT_NEAR(lr_schedule(10000, 2000, 10000, 2e-4), 0.0, 1e-12);
    EXPECT_NEAR(lr_schedule(6000, 2000, 10000, 2e-4), 1e-4, 1e-12);
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
}
