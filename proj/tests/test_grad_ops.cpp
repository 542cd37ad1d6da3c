// SPDX-License-Identifier: Apache-2.0
//
// vqcsi — digital CSI feedback simulation for near-field XL-MIMO links
// Copyright (C) 2026 the vqcsi authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
//
// Every operator's backward closure is checked against central finite
// differences on randomized inputs; discrete ops (lookup, straight-through)
// get exact algebraic checks instead.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "support/fd.hpp"
#include "vqcsi/grad/conv.hpp"
#include "vqcsi/grad/ops.hpp"
#include "vqcsi/rng.hpp"

using namespace vqcsi;
using grad::NodePtr;
using vqcsi::testing::fd_max_rel_error;

namespace {

constexpr double kTol = 1e-4;  // max relative error accepted against the oracle

NodePtr<double> mk(std::vector<std::int64_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return grad::leaf(std::move(t));
}

// fixed random weighting so reductions exercise every output element
// asymmetrically
Tensor<double> weights_like(const NodePtr<double>& n, Rng& rng) {
    Tensor<double> w(n->value.shape());
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(0.5, 1.5);
    return w;
}

NodePtr<double> wsum(const NodePtr<double>& y, const Tensor<double>& w) {
    return grad::sum_all(grad::mul(y, grad::constant(w)));
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
    Rng rng(101);
    auto a = mk({3, 4}, rng);
    auto b = mk({3, 4}, rng);

    SUBCASE("add") {
        auto probe = grad::add(a, b);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error({a, b}, [&] { return wsum(grad::add(a, b), w); }) < kTol);
    }
    SUBCASE("sub") {
        auto probe = grad::sub(a, b);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error({a, b}, [&] { return wsum(grad::sub(a, b), w); }) < kTol);
    }
    SUBCASE("mul") {
        auto probe = grad::mul(a, b);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error({a, b}, [&] { return wsum(grad::mul(a, b), w); }) < kTol);
    }
    SUBCASE("scale") {
        Tensor<double> w = weights_like(a, rng);
        CHECK(fd_max_rel_error({a}, [&] { return wsum(grad::scale(a, -1.7), w); }) < kTol);
    }
    SUBCASE("sigmoid") {
        Tensor<double> w = weights_like(a, rng);
        CHECK(fd_max_rel_error({a}, [&] { return wsum(grad::sigmoid(a), w); }) < kTol);
    }
    SUBCASE("square and mse") {
        Tensor<double> w = weights_like(a, rng);
        CHECK(fd_max_rel_error({a}, [&] { return wsum(grad::square(a), w); }) < kTol);
        CHECK(fd_max_rel_error({a, b}, [&] { return grad::mse(a, b); }) < kTol);
    }
}

TEST_CASE("relu matches finite differences away from the kink") {
    Rng rng(102);
    Tensor<double> t({4, 5});
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        double v = rng.uniform(-1.0, 1.0);
        t[i] = v + (v >= 0 ? 0.3 : -0.3);  // keep |x| > h so the kink is never crossed
    }
    auto x = grad::leaf(std::move(t));
    Tensor<double> w = weights_like(x, rng);
    CHECK(fd_max_rel_error({x}, [&] { return wsum(grad::relu(x), w); }) < kTol);
}

TEST_CASE("log_eps matches finite differences on positive inputs") {
    Rng rng(103);
    auto x = mk({2, 7}, rng, 0.1, 2.0);
    Tensor<double> w = weights_like(x, rng);
    CHECK(fd_max_rel_error({x}, [&] { return wsum(grad::log_eps(x), w); }) < kTol);
}

TEST_CASE("bias broadcasts match finite differences") {
    Rng rng(104);
    SUBCASE("last-dim bias") {
        auto x = mk({3, 2, 5}, rng);
        auto b = mk({5}, rng);
        Tensor<double> w = weights_like(x, rng);
        CHECK(fd_max_rel_error({x, b}, [&] { return wsum(grad::add_bias_lastdim(x, b), w); }) <
              kTol);
    }
    SUBCASE("channel bias") {
        auto x = mk({2, 3, 4, 4}, rng);
        auto b = mk({3}, rng);
        Tensor<double> w = weights_like(x, rng);
        CHECK(fd_max_rel_error({x, b}, [&] { return wsum(grad::add_bias_channels(x, b), w); }) <
              kTol);
    }
    SUBCASE("channel gating") {
        auto x = mk({2, 3, 4, 4}, rng);
        auto s = mk({2, 3}, rng);
        Tensor<double> w = weights_like(x, rng);
        CHECK(fd_max_rel_error({x, s}, [&] { return wsum(grad::mul_channels(x, s), w); }) < kTol);
    }
}

TEST_CASE("matrix products match finite differences") {
    Rng rng(105);
    SUBCASE("matmul") {
        auto a = mk({4, 3}, rng);
        auto b = mk({3, 5}, rng);
        auto probe = grad::matmul(a, b);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error({a, b}, [&] { return wsum(grad::matmul(a, b), w); }) < kTol);
    }
    SUBCASE("bmm") {
        auto a = mk({2, 3, 4}, rng);
        auto b = mk({2, 4, 5}, rng);
        auto probe = grad::bmm(a, b);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error({a, b}, [&] { return wsum(grad::bmm(a, b), w); }) < kTol);
    }
    SUBCASE("transpose_last2 rank2") {
        auto a = mk({4, 3}, rng);
        auto probe = grad::transpose_last2(a);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error({a}, [&] { return wsum(grad::transpose_last2(a), w); }) < kTol);
    }
    SUBCASE("transpose_last2 rank3") {
        auto a = mk({2, 4, 3}, rng);
        auto probe = grad::transpose_last2(a);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error({a}, [&] { return wsum(grad::transpose_last2(a), w); }) < kTol);
    }
}

TEST_CASE("shape moves match finite differences") {
    Rng rng(106);
    SUBCASE("reshape") {
        auto x = mk({2, 6}, rng);
        Tensor<double> w({3, 4});
        for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(0.5, 1.5);
        CHECK(fd_max_rel_error({x}, [&] { return wsum(grad::reshape(x, {3, 4}), w); }) < kTol);
    }
    SUBCASE("concat middle axis") {
        auto x = mk({2, 2, 3}, rng);
        auto y = mk({2, 4, 3}, rng);
        auto probe = grad::concat<double>({x, y}, 1);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error({x, y}, [&] { return wsum(grad::concat<double>({x, y}, 1), w); }) <
              kTol);
    }
    SUBCASE("concat last axis three inputs") {
        auto x = mk({3, 2}, rng);
        auto y = mk({3, 1}, rng);
        auto z = mk({3, 3}, rng);
        auto probe = grad::concat<double>({x, y, z}, 1);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error(
                  {x, y, z}, [&] { return wsum(grad::concat<double>({x, y, z}, 1), w); }) < kTol);
    }
    SUBCASE("slice") {
        auto x = mk({2, 5, 3}, rng);
        auto probe = grad::slice(x, 1, 1, 3);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error({x}, [&] { return wsum(grad::slice(x, 1, 1, 3), w); }) < kTol);
    }
    SUBCASE("tokens round trip") {
        auto x = mk({2, 3, 2, 2}, rng);
        auto probe = grad::bchw_to_tokens(x);
        Tensor<double> w = weights_like(probe, rng);
        CHECK(fd_max_rel_error({x}, [&] { return wsum(grad::bchw_to_tokens(x), w); }) < kTol);
        auto t = mk({2, 4, 3}, rng);
        auto probe2 = grad::tokens_to_bchw(t, 2, 2);
        Tensor<double> w2 = weights_like(probe2, rng);
        CHECK(fd_max_rel_error({t}, [&] { return wsum(grad::tokens_to_bchw(t, 2, 2), w2); }) <
              kTol);
        // the two moves invert each other
        auto rt = grad::tokens_to_bchw(grad::bchw_to_tokens(x), 2, 2);
        for (std::int64_t i = 0; i < rt->value.numel(); ++i)
            CHECK(rt->value[i] == doctest::Approx(x->value[i]));
    }
}

TEST_CASE("reductions match finite differences") {
    Rng rng(107);
    SUBCASE("sum_all and mean_all") {
        auto x = mk({3, 4}, rng);
        CHECK(fd_max_rel_error({x}, [&] { return grad::sum_all(x); }) < kTol);
        CHECK(fd_max_rel_error({x}, [&] { return grad::mean_all(x); }) < kTol);
    }
    SUBCASE("mean_axis0") {
        auto x = mk({5, 3}, rng);
        Tensor<double> w({3});
        for (std::int64_t i = 0; i < 3; ++i) w[i] = rng.uniform(0.5, 1.5);
        CHECK(fd_max_rel_error({x}, [&] { return wsum(grad::mean_axis0(x), w); }) < kTol);
    }
    SUBCASE("global_mean_pool") {
        auto x = mk({2, 3, 4, 4}, rng);
        Tensor<double> w({2, 3});
        for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(0.5, 1.5);
        CHECK(fd_max_rel_error({x}, [&] { return wsum(grad::global_mean_pool(x), w); }) < kTol);
    }
}

TEST_CASE("softmax matches finite differences") {
    Rng rng(108);
    auto x = mk({4, 6}, rng, -2.0, 2.0);
    Tensor<double> w = weights_like(x, rng);
    CHECK(fd_max_rel_error({x}, [&] { return wsum(grad::softmax_lastdim(x), w); }) < kTol);
    // rows sum to one
    auto y = grad::softmax_lastdim(x);
    for (std::int64_t r = 0; r < 4; ++r) {
        double s = 0;
        for (std::int64_t j = 0; j < 6; ++j) s += y->value[r * 6 + j];
        CHECK(s == doctest::Approx(1.0));
    }
}

TEST_CASE("layernorm matches finite differences") {
    Rng rng(109);
    auto x = mk({3, 4, 6}, rng, -2.0, 2.0);
    auto gain = mk({6}, rng, 0.5, 1.5);
    auto bias = mk({6}, rng);
    Tensor<double> w = weights_like(x, rng);
    CHECK(fd_max_rel_error({x, gain, bias},
                           [&] { return wsum(grad::layernorm(x, gain, bias), w); }) < kTol);
}

TEST_CASE("batchnorm2d matches finite differences") {
    Rng rng(110);
    auto x = mk({3, 2, 4, 4}, rng, -2.0, 2.0);
    auto gain = mk({2}, rng, 0.5, 1.5);
    auto bias = mk({2}, rng);
    Tensor<double> w = weights_like(x, rng);

    SUBCASE("training mode") {
        Tensor<double> rm({2}), rv = Tensor<double>::full({2}, 1.0);
        CHECK(fd_max_rel_error({x, gain, bias}, [&] {
                  return wsum(grad::batchnorm2d(x, gain, bias, rm, rv, true), w);
              }) < kTol);
    }
    SUBCASE("eval mode uses frozen statistics") {
        Tensor<double> rm({2}), rv({2});
        rm[0] = 0.1;
        rm[1] = -0.2;
        rv[0] = 0.8;
        rv[1] = 1.3;
        CHECK(fd_max_rel_error({x, gain, bias}, [&] {
                  return wsum(grad::batchnorm2d(x, gain, bias, rm, rv, false), w);
              }) < kTol);
    }
    SUBCASE("training updates running stats toward batch stats") {
        Tensor<double> rm({2}), rv = Tensor<double>::full({2}, 1.0);
        auto y = grad::batchnorm2d(x, gain, bias, rm, rv, true);
        // with momentum 0.1 the buffers move 10% of the way from their start
        double batch_mean0 = 0;
        for (std::int64_t b = 0; b < 3; ++b)
            for (std::int64_t k = 0; k < 16; ++k) batch_mean0 += x->value[(b * 2 + 0) * 16 + k];
        batch_mean0 /= 48.0;
        CHECK(rm[0] == doctest::Approx(0.1 * batch_mean0));
    }
}

TEST_CASE("conv2d matches finite differences") {
    Rng rng(111);
    SUBCASE("3x3 stride 1 pad 1") {
        auto x = mk({2, 2, 5, 5}, rng);
        auto w = mk({3, 2, 3, 3}, rng);
        auto probe = grad::conv2d(x, w, 1, 1);
        Tensor<double> rw = weights_like(probe, rng);
        CHECK(fd_max_rel_error({x, w}, [&] { return wsum(grad::conv2d(x, w, 1, 1), rw); }, 1e-5) <
              kTol);
    }
    SUBCASE("4x4 stride 2 pad 1 downsamples by two") {
        auto x = mk({2, 2, 8, 8}, rng);
        auto w = mk({3, 2, 4, 4}, rng);
        auto y = grad::conv2d(x, w, 2, 1);
        CHECK(y->value.shape() == std::vector<std::int64_t>{2, 3, 4, 4});
        Tensor<double> rw = weights_like(y, rng);
        CHECK(fd_max_rel_error({x, w}, [&] { return wsum(grad::conv2d(x, w, 2, 1), rw); }, 1e-5) <
              kTol);
    }
    SUBCASE("geometry that does not tile is rejected") {
        auto x = mk({1, 1, 8, 8}, rng);
        auto w = mk({1, 1, 3, 3}, rng);
        CHECK_THROWS_AS(grad::conv2d(x, w, 2, 1), contract_error);
    }
}

TEST_CASE("conv_transpose2d matches finite differences") {
    Rng rng(112);
    SUBCASE("4x4 stride 2 pad 1 upsamples by two") {
        auto x = mk({2, 3, 4, 4}, rng);
        auto w = mk({3, 2, 4, 4}, rng);
        auto y = grad::conv_transpose2d(x, w, 2, 1);
        CHECK(y->value.shape() == std::vector<std::int64_t>{2, 2, 8, 8});
        Tensor<double> rw = weights_like(y, rng);
        CHECK(fd_max_rel_error(
                  {x, w}, [&] { return wsum(grad::conv_transpose2d(x, w, 2, 1), rw); }, 1e-5) <
              kTol);
    }
    SUBCASE("3x3 stride 1 pad 1 preserves the plane") {
        auto x = mk({1, 2, 5, 5}, rng);
        auto w = mk({2, 2, 3, 3}, rng);
        auto y = grad::conv_transpose2d(x, w, 1, 1);
        CHECK(y->value.shape() == std::vector<std::int64_t>{1, 2, 5, 5});
        Tensor<double> rw = weights_like(y, rng);
        CHECK(fd_max_rel_error(
                  {x, w}, [&] { return wsum(grad::conv_transpose2d(x, w, 1, 1), rw); }, 1e-5) <
              kTol);
    }
}

TEST_CASE("conv_transpose2d is the exact adjoint of conv2d") {
    // <conv(x), y> == <x, convT(y)> with the same weight buffer
    Rng rng(113);
    auto x = mk({1, 3, 8, 8}, rng);
    auto w = mk({5, 3, 4, 4}, rng);
    auto y = mk({1, 5, 4, 4}, rng);
    auto cx = grad::conv2d(x, w, 2, 1);
    auto cty = grad::conv_transpose2d(y, w, 2, 1);
    double lhs = 0, rhs = 0;
    for (std::int64_t i = 0; i < cx->value.numel(); ++i) lhs += cx->value[i] * y->value[i];
    for (std::int64_t i = 0; i < x->value.numel(); ++i) rhs += x->value[i] * cty->value[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("pairwise_sqdist matches finite differences and brute force") {
    Rng rng(114);
    auto z = mk({6, 3}, rng);
    auto c = mk({4, 3}, rng);
    auto d = grad::pairwise_sqdist(z, c);
    for (std::int64_t m = 0; m < 6; ++m)
        for (std::int64_t k = 0; k < 4; ++k) {
            double acc = 0;
            for (std::int64_t j = 0; j < 3; ++j) {
                double diff = z->value[m * 3 + j] - c->value[k * 3 + j];
                acc += diff * diff;
            }
            CHECK(d->value[m * 4 + k] == doctest::Approx(acc).epsilon(1e-10));
        }
    Tensor<double> w = weights_like(d, rng);
    CHECK(fd_max_rel_error({z, c}, [&] { return wsum(grad::pairwise_sqdist(z, c), w); }) < kTol);
}

TEST_CASE("gather_rows accumulates over duplicate indices") {
    Rng rng(115);
    auto c = mk({3, 2}, rng);
    std::vector<std::int64_t> idx{0, 0, 2};
    auto y = grad::gather_rows(c, idx);
    CHECK(y->value.dim(0) == 3);
    auto loss = grad::sum_all(y);
    grad::backward(loss);
    CHECK(c->grad[0 * 2 + 0] == doctest::Approx(2.0));
    CHECK(c->grad[0 * 2 + 1] == doctest::Approx(2.0));
    CHECK(c->grad[1 * 2 + 0] == doctest::Approx(0.0));
    CHECK(c->grad[2 * 2 + 0] == doctest::Approx(1.0));
    CHECK_THROWS_AS(grad::gather_rows(c, std::vector<std::int64_t>{3}), contract_error);
}

TEST_CASE("straight_through forwards quantized values and passes gradients unchanged") {
    Rng rng(116);
    auto z = mk({4, 2}, rng);
    Tensor<double> zq({4, 2});
    for (std::int64_t i = 0; i < 8; ++i) zq[i] = rng.uniform(-1.0, 1.0);
    auto st = grad::straight_through(z, zq);
    for (std::int64_t i = 0; i < 8; ++i) CHECK(st->value[i] == doctest::Approx(zq[i]));
    // loss = sum(st^2) so dL/dst = 2 zq, which must land on z verbatim
    auto loss = grad::sum_all(grad::square(st));
    grad::backward(loss);
    for (std::int64_t i = 0; i < 8; ++i) CHECK(z->grad[i] == doctest::Approx(2.0 * zq[i]));
}

TEST_CASE("fan-out accumulates gradients additively") {
    Rng rng(117);
    auto x = mk({3}, rng);
    // loss = sum(x*x) + sum(x) so dL/dx = 2x + 1
    auto loss = grad::add(grad::sum_all(grad::mul(x, x)), grad::sum_all(x));
    grad::backward(loss);
    for (std::int64_t i = 0; i < 3; ++i)
        CHECK(x->grad[i] == doctest::Approx(2.0 * x->value[i] + 1.0));
}

TEST_CASE("backward contracts") {
    Rng rng(118);
    auto x = mk({2, 2}, rng);
    auto y = grad::mul(x, x);
    CHECK_THROWS_AS(grad::backward(y), contract_error);  // non-scalar loss
    auto loss = grad::sum_all(y);
    grad::backward(loss);
    CHECK(x->grad_ready);
    grad::zero_grads(loss);
    CHECK_FALSE(x->grad_ready);
}

TEST_CASE("constants receive no gradient storage") {
    Rng rng(119);
    auto x = mk({2}, rng);
    auto c = grad::constant(Tensor<double>::full({2}, 3.0));
    auto loss = grad::sum_all(grad::mul(x, c));
    grad::backward(loss);
    CHECK_FALSE(c->grad_ready);
    CHECK(x->grad[0] == doctest::Approx(3.0));
}

TEST_CASE("composite network block matches finite differences") {
    // conv -> bias -> relu -> pool -> linear -> layernorm -> softmax chain
    Rng rng(120);
    auto x = mk({2, 2, 4, 4}, rng);
    auto w1 = mk({3, 2, 3, 3}, rng, -0.5, 0.5);
    auto b1 = mk({3}, rng, -0.1, 0.1);
    auto w2 = mk({3, 4}, rng, -0.5, 0.5);
    auto b2 = mk({4}, rng, -0.1, 0.1);
    auto gain = mk({4}, rng, 0.8, 1.2);
    auto bias = mk({4}, rng, -0.1, 0.1);
    Tensor<double> w({2, 4});
    for (std::int64_t i = 0; i < 8; ++i) w[i] = rng.uniform(0.5, 1.5);
    auto build = [&] {
        auto h = grad::relu(grad::add_bias_channels(grad::conv2d(x, w1, 1, 1), b1));
        auto p = grad::global_mean_pool(h);
        auto q = grad::add_bias_lastdim(grad::matmul(p, w2), b2);
        auto ln = grad::layernorm(q, gain, bias);
        return wsum(grad::softmax_lastdim(ln), w);
    };
    CHECK(fd_max_rel_error({x, w1, b1, w2, b2, gain, bias}, build) < kTol);
}
