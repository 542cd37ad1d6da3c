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

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "support/cluster.hpp"
#include "support/fd.hpp"
#include "vqcsi/rng.hpp"
#include "vqcsi/vq/vq.hpp"

using namespace vqcsi;

TEST_CASE("quantize picks the nearest codeword") {
    Tensor<double> cb({2, 2}, {0, 0, 1, 1});
    auto [idx, zq] = vq::quantize(Tensor<double>({1, 2}, {0.9, 0.7}), cb);
    CHECK(idx == std::vector<std::uint32_t>{1});
    CHECK(zq[0] == 1.0);
    CHECK(zq[1] == 1.0);
}

TEST_CASE("quantize returns a codeword exactly when fed one") {
    Tensor<double> cb({4, 3}, {1, 2, 3, -1, 0, 1, 0.5, 0.5, 0.5, 2, 2, 2});
    auto [idx, zq] = vq::quantize(Tensor<double>({1, 3}, {-1, 0, 1}), cb);
    CHECK(idx == std::vector<std::uint32_t>{1});
    for (int j = 0; j < 3; ++j) CHECK(zq[j] == cb[3 + j]);
}

TEST_CASE("quantize breaks ties toward the lowest index") {
    Tensor<double> cb({2, 2}, {0, 0, 1, 1});
    auto [idx, zq] = vq::quantize(Tensor<double>({1, 2}, {0.5, 0.5}), cb);
    CHECK(idx == std::vector<std::uint32_t>{0});
    CHECK(zq[0] == 0.0);
}

TEST_CASE("quantize rejects bad shapes") {
    Tensor<double> cb({3, 2});  // K = 3 is not a power of two
    CHECK_THROWS_AS(vq::quantize(Tensor<double>({1, 2}), cb), contract_error);
    Tensor<double> cb2({4, 2});
    CHECK_THROWS_AS(vq::quantize(Tensor<double>({1, 3}), cb2), contract_error);
}

TEST_CASE("quantize matches brute-force nearest neighbor on 1000 random instances") {
    Rng rng(2001);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::int64_t m = 1 + static_cast<std::int64_t>(rng.uniform_index(32));
        const std::int64_t k = 1 << (1 + rng.uniform_index(3));  // 2, 4, or 8
        const std::int64_t d = 1 + static_cast<std::int64_t>(rng.uniform_index(6));
        auto z = Tensor<double>::uniform({m, d}, 1.0, rng);
        auto cb = Tensor<double>::uniform({k, d}, 1.0, rng);
        auto [idx, zq] = vq::quantize(z, cb);
        for (std::int64_t r = 0; r < m; ++r) {
            const auto expected = testing::brute_force_nearest(z, r, cb);
            REQUIRE(idx[static_cast<std::size_t>(r)] == static_cast<std::uint32_t>(expected));
            for (std::int64_t j = 0; j < d; ++j)
                REQUIRE(zq[r * d + j] == cb[expected * d + j]);
        }
    }
}

TEST_CASE("vq loss value and gradients follow the stop-gradient split") {
    SUBCASE("zero at perfect quantization") {
        Tensor<double> z({2, 2}, {1, 2, 3, 4});
        CHECK(vq::vq_loss_value(z, z, 0.25) == 0.0);
    }
    SUBCASE("single-vector worked example") {
        auto z = grad::leaf(Tensor<double>({1, 2}, {1.0, 0.0}));
        Tensor<double> zq({1, 2});  // codeword at the origin
        auto loss = vq::vq_loss_node(z, zq, 0.25);
        CHECK(loss->value[0] == doctest::Approx(1.25));
        grad::backward(loss);
        CHECK(z->grad[0] == doctest::Approx(0.5));
        CHECK(z->grad[1] == doctest::Approx(0.0));
    }
    SUBCASE("beta = 0 leaves no gradient path") {
        auto z = grad::leaf(Tensor<double>({2, 2}, {1, 2, 3, 4}));
        Tensor<double> zq({2, 2});
        auto loss = vq::vq_loss_node(z, zq, 0.0);
        grad::backward(loss);
        for (int i = 0; i < 4; ++i) CHECK(z->grad[i] == 0.0);
        CHECK(loss->value[0] == doctest::Approx(vq::vq_loss_value(z->value, zq, 0.0)));
    }
    SUBCASE("node value equals the plain value for random data") {
        Rng rng(55);
        auto zt = Tensor<double>::uniform({5, 3}, 1.0, rng);
        auto zqt = Tensor<double>::uniform({5, 3}, 1.0, rng);
        auto z = grad::leaf(zt);
        auto loss = vq::vq_loss_node(z, zqt, 0.25);
        CHECK(loss->value[0] == doctest::Approx(vq::vq_loss_value(zt, zqt, 0.25)));
    }
    SUBCASE("gradient is the commitment term only: 2 beta (Z - Zq) / M") {
        // the node's gradient intentionally differs from the derivative of its
        // displayed value (the codebook term sits behind a stop-gradient), so
        // the check is closed-form rather than finite-difference
        Rng rng(56);
        auto z = grad::leaf(Tensor<double>::uniform({4, 3}, 1.0, rng));
        Tensor<double> zq = Tensor<double>::uniform({4, 3}, 1.0, rng);
        const double beta = 0.25;
        auto loss = vq::vq_loss_node(z, zq, beta);
        grad::backward(loss);
        for (std::int64_t i = 0; i < 12; ++i)
            CHECK(z->grad[i] ==
                  doctest::Approx(2.0 * beta * (z->value[i] - zq[i]) / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("straight-through keeps the encoder-side gradient element-wise identical") {
    Rng rng(57);
    auto z = grad::leaf(Tensor<double>::uniform({3, 4}, 1.0, rng));
    Tensor<double> zq = Tensor<double>::uniform({3, 4}, 1.0, rng);
    auto st = vq::ste_pass(z, zq);
    auto w = grad::constant(Tensor<double>::uniform({3, 4}, 1.0, rng));
    auto loss = grad::sum_all(grad::mul(grad::square(st), w));
    grad::backward(loss);
    REQUIRE(st->grad_ready);
    for (std::int64_t i = 0; i < 12; ++i) CHECK(z->grad[i] == st->grad[i]);  // exact, not approx
}

TEST_CASE("entropy loss hits its closed-form values") {
    CHECK(vq::entropy_loss(Tensor<double>({4}, {0.25, 0.25, 0.25, 0.25})) ==
          doctest::Approx(-std::log(4.0)));
    CHECK(vq::entropy_loss(Tensor<double>({4}, {0, 1, 0, 0})) == 0.0);
    CHECK(vq::entropy_loss(Tensor<double>({4}, {0.5, 0.5, 0, 0})) ==
          doctest::Approx(-std::log(2.0)));
}

TEST_CASE("entropy loss is bounded by [-log K, 0]") {
    Rng rng(58);
    for (int trial = 0; trial < 200; ++trial) {
        const std::int64_t k = 2 + static_cast<std::int64_t>(rng.uniform_index(15));
        Tensor<double> p({k});
        double total = 0;
        for (std::int64_t i = 0; i < k; ++i) {
            p[i] = rng.uniform();
            total += p[i];
        }
        for (std::int64_t i = 0; i < k; ++i) p[i] /= total;
        const double e = vq::entropy_loss(p);
        CHECK(e <= 1e-12);
        CHECK(e >= -std::log(static_cast<double>(k)) - 1e-12);
    }
}

TEST_CASE("perplexity counts effectively used codewords") {
    CHECK(vq::perplexity(Tensor<double>({8}, std::vector<double>(8, 0.125))) ==
          doctest::Approx(8.0));
    CHECK(vq::perplexity(Tensor<double>({8}, {1, 0, 0, 0, 0, 0, 0, 0})) == doctest::Approx(1.0));
    CHECK(vq::perplexity(Tensor<double>({4}, {0.5, 0.5, 0, 0})) == doctest::Approx(2.0));
}

TEST_CASE("usage histogram is a probability vector over counts") {
    std::vector<std::uint32_t> q{0, 1, 1, 3, 3, 3, 3, 1};
    auto p = vq::usage_histogram<double>(q, 4);
    CHECK(p[0] == doctest::Approx(1.0 / 8));
    CHECK(p[1] == doctest::Approx(3.0 / 8));
    CHECK(p[2] == 0.0);
    CHECK(p[3] == doctest::Approx(4.0 / 8));
    double s = 0;
    for (int i = 0; i < 4; ++i) s += p[i];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(vq::usage_histogram<double>({5}, 4), contract_error);
    CHECK_THROWS_AS(vq::usage_histogram<double>({}, 4), contract_error);
}

TEST_CASE("soft entropy node matches a hand-computed value and finite differences") {
    Rng rng(59);
    auto z = grad::leaf(Tensor<double>::uniform({5, 2}, 1.0, rng));
    auto c = grad::leaf(Tensor<double>::uniform({4, 2}, 1.0, rng));
    auto node = vq::entropy_loss_node(z, c, 1.0);

    // hand computation of mean soft assignment entropy
    std::vector<double> usage(4, 0.0);
    for (int m = 0; m < 5; ++m) {
        double w[4], tot = 0;
        for (int k = 0; k < 4; ++k) {
            double d2 = 0;
            for (int j = 0; j < 2; ++j) {
                double diff = z->value[m * 2 + j] - c->value[k * 2 + j];
                d2 += diff * diff;
            }
            w[k] = std::exp(-d2);
            tot += w[k];
        }
        for (int k = 0; k < 4; ++k) usage[static_cast<std::size_t>(k)] += w[k] / tot / 5.0;
    }
    double expected = 0;
    for (double p : usage) expected += p * std::log(p);
    CHECK(node->value[0] == doctest::Approx(expected).epsilon(1e-9));

    CHECK(vqcsi::testing::fd_max_rel_error(
              {z, c}, [&] { return vq::entropy_loss_node(z, c, 1.0); }) < 1e-4);
}

TEST_CASE("codebook-side loss routes gradient to the codebook only") {
    Rng rng(60);
    auto cb = grad::leaf(Tensor<double>::uniform({4, 3}, 1.0, rng));
    Tensor<double> z = Tensor<double>::uniform({6, 3}, 1.0, rng);
    std::vector<std::uint32_t> idx{0, 2, 2, 1, 3, 0};
    auto node = vq::codebook_loss_node(cb, z, idx);
    // value = mean over rows of ||C[q] - z||^2
    double expected = 0;
    for (int m = 0; m < 6; ++m)
        for (int j = 0; j < 3; ++j) {
            double diff = cb->value[idx[static_cast<std::size_t>(m)] * 3 + j] - z[m * 3 + j];
            expected += diff * diff;
        }
    expected /= 6.0;
    CHECK(node->value[0] == doctest::Approx(expected));
    CHECK(vqcsi::testing::fd_max_rel_error(
              {cb}, [&] { return vq::codebook_loss_node(cb, z, idx); }) < 1e-4);
}

TEST_CASE("ema update reproduces the worked single-step example") {
    // codeword 0 carries the example state; codeword 1 is inert ballast
    Tensor<double> cb({2, 2}, {1, 0, -5, -5});
    vq::EmaState<double> st;
    st.decay = 0.9;
    st.cluster_size = Tensor<double>({2}, {1.0, 1.0});
    st.embed_sum = Tensor<double>({2, 2}, {1, 0, -5, -5});
    Tensor<double> z({2, 2}, {2, 0, -5, -5});
    vq::ema_update(st, cb, z, {0, 1});
    CHECK(st.cluster_size[0] == doctest::Approx(1.0));
    CHECK(st.embed_sum[0] == doctest::Approx(1.1));
    CHECK(st.embed_sum[1] == doctest::Approx(0.0));
    CHECK(cb[0] == doctest::Approx(1.1).epsilon(1e-4));
    CHECK(cb[1] == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("unassigned codewords sit at the fixed point of their running mean") {
    Tensor<double> cb({2, 2}, {3, -1, 0.5, 2});
    auto st = vq::EmaState<double>::from_codebook(cb, 0.99);
    Tensor<double> z({1, 2}, {0.4, 2.1});
    vq::ema_update(st, cb, z, {1});  // nothing assigned to codeword 0
    CHECK(cb[0] == doctest::Approx(3.0).epsilon(1e-4));
    CHECK(cb[1] == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("repeated ema updates converge to the cluster mean") {
    Rng rng(61);
    Tensor<double> cb({2, 2}, {0, 0, 10, 10});
    auto st = vq::EmaState<double>::from_codebook(cb, 0.99);
    // fixed cluster with mean (1.5, -0.5) feeding codeword 0, ballast on 1
    for (int step = 0; step < 500; ++step) {
        Tensor<double> z({3, 2});
        for (int r = 0; r < 2; ++r) {
            z[r * 2 + 0] = 1.5 + rng.normal() * 0.05;
            z[r * 2 + 1] = -0.5 + rng.normal() * 0.05;
        }
        z[4] = 10;
        z[5] = 10;
        vq::ema_update(st, cb, z, {0, 0, 1});
    }
    CHECK(cb[0] == doctest::Approx(1.5).epsilon(2e-3));
    CHECK(cb[1] == doctest::Approx(-0.5).epsilon(4e-3));
}

TEST_CASE("ema with zero decay performs exact Lloyd iterations") {
    Rng rng(62);
    SUBCASE("balanced clusters cancel the Laplace smoothing") {
        // 4 clusters x 8 points each: equal counts make the smoothing exact
        Tensor<double> x({32, 2});
        const double cx[4] = {2, -2, 2, -2}, cy[4] = {2, 2, -2, -2};
        for (int c = 0; c < 4; ++c)
            for (int i = 0; i < 8; ++i) {
                x[(c * 8 + i) * 2 + 0] = cx[c] + rng.normal() * 0.2;
                x[(c * 8 + i) * 2 + 1] = cy[c] + rng.normal() * 0.2;
            }
        Tensor<double> cb({4, 2}, {2, 2, -2, 2, 2, -2, -2, -2});
        Tensor<double> oracle = cb;
        auto st = vq::EmaState<double>::from_codebook(cb, 0.0);
        for (int it = 0; it < 5; ++it) {
            auto [idx, zq] = vq::quantize(x, cb);
            vq::ema_update(st, cb, x, idx);
            oracle = vqcsi::testing::lloyd_step(x, oracle);
        }
        for (std::int64_t i = 0; i < 8; ++i)
            CHECK(cb[i] == doctest::Approx(oracle[i]).epsilon(1e-10));
    }
    SUBCASE("general instances match within the smoothing floor") {
        Tensor<double> x = Tensor<double>::uniform({40, 3}, 2.0, rng);
        Tensor<double> cb = vq::init_codebook(x, 4, rng);
        Tensor<double> oracle = cb;
        auto st = vq::EmaState<double>::from_codebook(cb, 0.0);
        for (int it = 0; it < 10; ++it) {
            auto [idx, zq] = vq::quantize(x, cb);
            vq::ema_update(st, cb, x, idx);
            oracle = vqcsi::testing::lloyd_step(x, oracle);
        }
        for (std::int64_t i = 0; i < cb.numel(); ++i)
            CHECK(cb[i] == doctest::Approx(oracle[i]).epsilon(1e-4));
    }
}

TEST_CASE("full pipeline lands near the Lloyd oracle on a 4-cluster mixture") {
    Rng rng(63);
    const int per = 100;
    Tensor<double> x({4 * per, 2});
    const double cx[4] = {2, -2, 2, -2}, cy[4] = {2, 2, -2, -2};
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < per; ++i) {
            x[(c * per + i) * 2 + 0] = cx[c] + rng.normal() * 0.3;
            x[(c * per + i) * 2 + 1] = cy[c] + rng.normal() * 0.3;
        }
    Rng seed_rng = rng.substream("init", 0);
    Tensor<double> cb = vq::init_codebook(x, 4, seed_rng);
    Tensor<double> oracle = vqcsi::testing::lloyd_run(x, cb, 30);
    auto st = vq::EmaState<double>::from_codebook(cb, 0.0);
    for (int it = 0; it < 30; ++it) {
        auto [idx, zq] = vq::quantize(x, cb);
        vq::ema_update(st, cb, x, idx);
    }
    // matched pairing: each final codeword within 0.05 of a distinct oracle one
    std::set<std::int64_t> used;
    for (std::int64_t i = 0; i < 4; ++i) {
        std::int64_t best = -1;
        double best_d = 1e18;
        for (std::int64_t j = 0; j < 4; ++j) {
            if (used.count(j)) continue;
            const double dx = cb[i * 2] - oracle[j * 2];
            const double dy = cb[i * 2 + 1] - oracle[j * 2 + 1];
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d) {
                best_d = d2;
                best = j;
            }
        }
        used.insert(best);
        CHECK(std::sqrt(best_d) < 0.05);
    }
}

TEST_CASE("k-means++ init picks the provided vectors when counts match") {
    Rng rng(64);
    Tensor<double> x({4, 2}, {0, 0, 5, 5, -5, 5, 0, -7});
    auto cb = vq::init_codebook(x, 4, rng);
    std::set<std::pair<double, double>> want{{0, 0}, {5, 5}, {-5, 5}, {0, -7}};
    std::set<std::pair<double, double>> got;
    for (int i = 0; i < 4; ++i) got.insert({cb[i * 2], cb[i * 2 + 1]});
    CHECK(got == want);
}

TEST_CASE("k-means++ init is deterministic and survives duplicate-heavy input") {
    Tensor<double> x({3, 2}, {1, 1, 1, 1, 1, 1});  // a single distinct point
    Rng r1(65), r2(65);
    auto a = vq::init_codebook(x, 4, r1);
    auto b = vq::init_codebook(x, 4, r2);
    CHECK(a.all_finite());
    for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
    // jittered duplicates stay close to the lone input point
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(a[i * 2] - 1.0) < 0.1);
        CHECK(std::abs(a[i * 2 + 1] - 1.0) < 0.1);
    }
}
