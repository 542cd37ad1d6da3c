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

#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "vqcsi/errors.hpp"
#include "vqcsi/grad/ops.hpp"
#include "vqcsi/nets/model.hpp"
#include "vqcsi/rng.hpp"

#include "support/fd.hpp"

using namespace vqcsi;
using namespace vqcsi::nets;
using grad::constant;
using grad::NodePtr;
using grad::ParamStore;

namespace {

// one downsampling stage keeps batchnorm statistics well-populated at the
// top level (2x2 spatial), which keeps the loss smooth for finite differences
NetConfig tiny_config(Backbone backbone) {
    NetConfig cfg;
    cfg.backbone = backbone;
    cfg.input_h = 8;
    cfg.input_w = 8;
    cfg.bottom_h = 4;
    cfg.bottom_w = 4;
    cfg.width = 2;
    cfg.latent_dim = 3;
    cfg.d_model = 4;
    cfg.num_heads = 2;
    cfg.num_blocks = 1;
    cfg.mlp_ratio = 2;
    cfg.validate();
    return cfg;
}

template <typename T>
Tensor<T> zero_tensor(const std::vector<std::int64_t>& shape) {
    return Tensor<T>(shape);
}

double max_abs(const Tensor<double>& t) {
    double m = 0;
    for (std::int64_t i = 0; i < t.numel(); ++i) m = std::max(m, std::abs(t[i]));
    return m;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
    REQUIRE(a.same_shape(b));
    double m = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

void zero_param(ParamStore<double>& store, const std::string& name) {
    store.at(name)->value.fill(0.0);
}

}  // namespace

TEST_CASE("modnet with zeroed gate and residual halves the features") {
    Rng rng(3);
    ParamStore<double> store;
    NetState<double> st{store, rng, true};

    auto x = constant(Tensor<double>::normal({2, 3, 4, 4}, 1.0, rng));
    snr_modnet(st, "m", x, 10.0);  // create parameters
    zero_param(store, "m.gate.w");
    zero_param(store, "m.gate.b");
    zero_param(store, "m.res1.w");
    zero_param(store, "m.res1.b");
    zero_param(store, "m.res2.w");
    zero_param(store, "m.res2.b");

    auto out = snr_modnet(st, "m", x, 10.0);
    double worst = 0;
    for (std::int64_t i = 0; i < out->value.numel(); ++i) {
        worst = std::max(worst, std::abs(out->value[i] - 0.5 * x->value[i]));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("modnet with zeroed residual is a pure channel gate") {
    Rng rng(4);
    ParamStore<double> store;
    NetState<double> st{store, rng, true};

    auto x = constant(Tensor<double>::full({2, 3, 4, 4}, 1.0));
    snr_modnet(st, "m", x, 5.0);
    zero_param(store, "m.res2.w");
    zero_param(store, "m.res2.b");

    auto out = snr_modnet(st, "m", x, 5.0);
    // with unit features the output equals the gate, constant per channel
    for (std::int64_t b = 0; b < 2; ++b) {
        for (std::int64_t c = 0; c < 3; ++c) {
            const double s = out->value[(b * 3 + c) * 16];
            CHECK(s > 0.0);
            CHECK(s < 1.0);
            for (std::int64_t i = 0; i < 16; ++i) {
                CHECK(out->value[(b * 3 + c) * 16 + i] == doctest::Approx(s).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("modnet matches finite differences") {
    Rng rng(5);
    ParamStore<double> store;
    NetState<double> st{store, rng, true};

    auto x = grad::leaf(Tensor<double>::normal({2, 2, 3, 3}, 1.0, rng), "x");
    snr_modnet(st, "m", x, 7.0);

    std::vector<NodePtr<double>> leaves = {x, store.at("m.gate.w"), store.at("m.gate.b"),
                                           store.at("m.snr1.w"), store.at("m.res1.w"),
                                           store.at("m.res2.w")};
    const double err = testing::fd_max_rel_error(
        leaves, [&] { return grad::mean_all(grad::square(snr_modnet(st, "m", x, 7.0))); });
    CHECK(err < 1e-4);
}

TEST_CASE("snr token embeds distinct SNRs into distinct vectors") {
    Rng rng(6);
    ParamStore<double> store;
    NetState<double> st{store, rng, true};

    auto t0 = snr_token(st, "tok", 0.0, 2, 8);
    auto t1 = snr_token(st, "tok", 12.0, 2, 8);
    CHECK(t0->value.rank() == 3);
    CHECK(t0->value.dim(0) == 2);
    CHECK(t0->value.dim(1) == 1);
    CHECK(t0->value.dim(2) == 8);
    CHECK(max_abs_diff(t0->value, t1->value) > 0.0);
}

TEST_CASE("transformer block preserves sequence length around the SNR prefix") {
    Rng rng(7);
    ParamStore<double> store;
    NetState<double> st{store, rng, true};

    auto x = constant(Tensor<double>::normal({2, 5, 8}, 1.0, rng));
    auto tok = snr_token(st, "tok", 4.0, 2, 8);
    auto y = transformer_block(st, "blk", x, tok, 2, 2);
    CHECK(y->value.dim(0) == 2);
    CHECK(y->value.dim(1) == 5);
    CHECK(y->value.dim(2) == 8);
}

TEST_CASE("encode produces the configured two-level latent shapes") {
    Rng data_rng(8);
    for (const NetConfig& cfg : {NetConfig::desk_cnn(), NetConfig::desk_transformer()}) {
        Rng rng(9);
        ParamStore<double> store;
        NetState<double> st{store, rng, true};
        auto x = constant(Tensor<double>::normal({2, 2, 32, 32}, 1.0, data_rng));
        const LatentPair<double> latents = encode(st, cfg, x, 10.0);

        CHECK(latents.bottom->value.dim(0) == 2);
        CHECK(latents.bottom->value.dim(1) == cfg.latent_dim);
        CHECK(latents.bottom->value.dim(2) == 8);
        CHECK(latents.bottom->value.dim(3) == 8);
        CHECK(latents.top->value.dim(2) == 4);
        CHECK(latents.top->value.dim(3) == 4);
        CHECK(latents.bottom->value.all_finite());
        CHECK(latents.top->value.all_finite());
    }
}

TEST_CASE("paper-scale profiles keep the half-resolution latent layout") {
    Rng data_rng(10);
    for (const NetConfig& cfg : {NetConfig::paper_cnn(), NetConfig::paper_transformer()}) {
        Rng rng(11);
        ParamStore<double> store;
        NetState<double> st{store, rng, true};
        auto x = constant(Tensor<double>::normal({1, 2, 32, 32}, 1.0, data_rng));
        const LatentPair<double> latents = encode(st, cfg, x, 5.0);
        CHECK(latents.bottom->value.dim(2) == 16);
        CHECK(latents.bottom->value.dim(3) == 16);
        CHECK(latents.top->value.dim(2) == 8);
        CHECK(latents.top->value.dim(3) == 8);
    }
}

TEST_CASE("eval-mode forward passes are bit-identical") {
    Rng data_rng(12);
    const auto x_val = Tensor<double>::normal({2, 2, 32, 32}, 1.0, data_rng);
    for (const NetConfig& cfg : {NetConfig::desk_cnn(), NetConfig::desk_transformer()}) {
        Rng rng(13);
        ParamStore<double> store;
        NetState<double> train{store, rng, true};
        encode(train, cfg, constant(x_val), 10.0);  // create parameters

        NetState<double> eval{store, rng, false};
        const LatentPair<double> a = encode(eval, cfg, constant(x_val), 10.0);
        const LatentPair<double> b = encode(eval, cfg, constant(x_val), 10.0);
        CHECK(max_abs_diff(a.bottom->value, b.bottom->value) == 0.0);
        CHECK(max_abs_diff(a.top->value, b.top->value) == 0.0);
    }
}

TEST_CASE("decode restores the input block shape for both backbones") {
    Rng data_rng(14);
    for (const NetConfig& cfg : {NetConfig::desk_cnn(), NetConfig::desk_transformer()}) {
        Rng rng(15);
        ParamStore<double> store;
        NetState<double> st{store, rng, true};
        auto x = constant(Tensor<double>::normal({2, 2, 32, 32}, 1.0, data_rng));
        const LatentPair<double> latents = encode(st, cfg, x, 10.0);
        auto out = decode(st, cfg, latents.top, latents.bottom, 10.0);
        CHECK(out->value.same_shape(x->value));
        CHECK(out->value.all_finite());
    }
}

TEST_CASE("zero latents and fresh biases decode to exactly zero") {
    const NetConfig cfg = NetConfig::desk_cnn();
    Rng rng(16);
    ParamStore<double> store;
    NetState<double> st{store, rng, false};

    auto top = constant(zero_tensor<double>({2, cfg.latent_dim, 4, 4}));
    auto bottom = constant(zero_tensor<double>({2, cfg.latent_dim, 8, 8}));
    auto out = decode(st, cfg, top, bottom, 10.0);
    CHECK(max_abs(out->value) == 0.0);
}

TEST_CASE("outputs respond to the SNR input") {
    Rng data_rng(17);
    const auto x_val = Tensor<double>::normal({2, 2, 32, 32}, 1.0, data_rng);
    for (const NetConfig& cfg : {NetConfig::desk_cnn(), NetConfig::desk_transformer()}) {
        Rng rng(18);
        ParamStore<double> store;
        NetState<double> st{store, rng, false};
        NetState<double> init{store, rng, true};
        encode(init, cfg, constant(x_val), 0.0);

        const LatentPair<double> lo = encode(st, cfg, constant(x_val), 0.0);
        const LatentPair<double> hi = encode(st, cfg, constant(x_val), 15.0);
        CHECK(max_abs_diff(lo.bottom->value, hi.bottom->value) > 0.0);

        auto out_lo = decode(st, cfg, lo.top, lo.bottom, 0.0);
        auto out_hi = decode(st, cfg, lo.top, lo.bottom, 15.0);
        CHECK(max_abs_diff(out_lo->value, out_hi->value) > 0.0);
    }
}

TEST_CASE("CNN backbone is lighter than the Transformer at matched latents") {
    Rng data_rng(19);
    const auto x_val = Tensor<double>::normal({1, 2, 32, 32}, 1.0, data_rng);
    const std::pair<NetConfig, NetConfig> pairs[] = {
        {NetConfig::desk_cnn(), NetConfig::desk_transformer()},
        {NetConfig::paper_cnn(), NetConfig::paper_transformer()},
    };
    for (const auto& [cnn_cfg, tr_cfg] : pairs) {
        std::int64_t counts[2];
        const NetConfig* cfgs[2] = {&cnn_cfg, &tr_cfg};
        for (int i = 0; i < 2; ++i) {
            Rng rng(20);
            ParamStore<double> store;
            NetState<double> st{store, rng, true};
            auto x = constant(x_val);
            const LatentPair<double> latents = encode(st, *cfgs[i], x, 10.0);
            decode(st, *cfgs[i], latents.top, latents.bottom, 10.0);
            counts[i] = store.trainable_scalars();
        }
        CHECK(counts[0] < counts[1]);
    }
}

TEST_CASE("encoder STE decoder graph matches finite differences at tiny widths") {
    for (const Backbone backbone : {Backbone::kCnn, Backbone::kTransformer}) {
        const NetConfig cfg = tiny_config(backbone);
        Rng rng(21);
        ParamStore<double> store;
        NetState<double> st{store, rng, true};

        Rng data_rng(22);
        auto x = grad::leaf(Tensor<double>::normal({2, 2, 8, 8}, 1.0, data_rng), "x");
        const auto target = Tensor<double>::normal({2, 2, 8, 8}, 1.0, data_rng);

        // a fixed offset stands in for the quantization displacement; frozen
        // values keep the loss smooth so the oracle stays valid while the
        // straight-through op is exercised exactly as in training
        const LatentPair<double> first = encode(st, cfg, x, 10.0);
        auto frozen_offset = [&](const NodePtr<double>& z) {
            const std::int64_t rows = z->value.dim(0) * z->value.dim(2) * z->value.dim(3);
            Tensor<double> offset({rows, z->value.dim(1)});
            for (std::int64_t i = 0; i < offset.numel(); ++i) {
                offset[i] = 0.3 * std::sin(0.5 + static_cast<double>(i));
            }
            return offset;
        };
        const Tensor<double> off_b = frozen_offset(first.bottom);
        const Tensor<double> off_t = frozen_offset(first.top);

        auto build = [&]() {
            const LatentPair<double> latents = encode(st, cfg, x, 10.0);
            auto ste = [&](const NodePtr<double>& z, const Tensor<double>& off) {
                const std::int64_t B = z->value.dim(0), C = z->value.dim(1);
                const std::int64_t H = z->value.dim(2), W = z->value.dim(3);
                auto tokens = grad::bchw_to_tokens(z);
                auto flat = grad::reshape(tokens, {B * H * W, C});
                Tensor<double> zq(flat->value.shape());
                for (std::int64_t i = 0; i < zq.numel(); ++i) {
                    zq[i] = flat->value[i] + off[i];
                }
                auto q = grad::straight_through(flat, zq);
                return grad::tokens_to_bchw(grad::reshape(q, {B, H * W, C}), H, W);
            };
            auto out = decode(st, cfg, ste(latents.top, off_t), ste(latents.bottom, off_b), 10.0);
            return grad::mse(out, grad::constant(target));
        };

        build();  // create the decoder parameters before collecting leaves

        std::vector<NodePtr<double>> leaves = {x};
        const std::vector<std::string> names =
            backbone == Backbone::kCnn
                ? std::vector<std::string>{"enc.stem.w", "enc.down0.mod.gate.w", "enc.top_head.w",
                                           "dec.refine.bn.gain", "dec.up1.w", "dec.head.b"}
                : std::vector<std::string>{"enc.patch.w", "enc.pos", "enc.block0.q.w",
                                           "enc.snr_token.embed.w", "dec.block0.mlp1.w",
                                           "dec.head.b"};
        for (const std::string& name : names) leaves.push_back(store.at(name));
        const double err = testing::fd_max_rel_error(leaves, build, 1e-5);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("backbone names parse and bad shapes are rejected") {
    CHECK(backbone_from_string("cnn") == Backbone::kCnn);
    CHECK(backbone_from_string("transformer") == Backbone::kTransformer);
    CHECK_THROWS_AS(backbone_from_string("mlp"), config_error);
    CHECK(to_string(Backbone::kCnn) == "cnn");

    const NetConfig cfg = NetConfig::desk_cnn();
    Rng rng(25);
    ParamStore<double> store;
    NetState<double> st{store, rng, true};
    auto bad = constant(zero_tensor<double>({2, 2, 16, 16}));
    CHECK_THROWS_AS(encode(st, cfg, bad, 10.0), contract_error);

    auto top = constant(zero_tensor<double>({2, cfg.latent_dim, 4, 4}));
    auto bottom = constant(zero_tensor<double>({1, cfg.latent_dim, 8, 8}));
    CHECK_THROWS_AS(decode(st, cfg, top, bottom, 10.0), contract_error);

    NetConfig invalid = cfg;
    invalid.bottom_h = 12;
    CHECK_THROWS_AS(invalid.validate(), contract_error);
    invalid = cfg;
    invalid.num_heads = 3;
    CHECK_THROWS_AS(invalid.validate(), contract_error);
}
