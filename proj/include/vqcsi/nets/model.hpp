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
// Hierarchical SNR-adaptive encoder/decoder pairs over sparse CSI blocks.
// Both backbones produce a bottom latent at input/stages resolution and a
// top latent at half that; the decoder refines the top level, upsamples,
// fuses with the bottom level through a 3x3 conv, and upsamples to the
// full block.

#ifndef VQCSI_NETS_MODEL_HPP
#define VQCSI_NETS_MODEL_HPP

#include <bit>
#include <cstdint>
#include <string>

#include "vqcsi/errors.hpp"
#include "vqcsi/nets/layers.hpp"

namespace vqcsi::nets {

enum class Backbone { kCnn, kTransformer };

inline Backbone backbone_from_string(const std::string& name) {
    if (name == "cnn") return Backbone::kCnn;
    if (name == "transformer") return Backbone::kTransformer;
    throw config_error("unknown backbone '" + name + "' (expected cnn or transformer)");
}

inline std::string to_string(Backbone b) {
    return b == Backbone::kCnn ? "cnn" : "transformer";
}

struct NetConfig {
    Backbone backbone = Backbone::kCnn;
    std::int64_t input_channels = 2;
    std::int64_t input_h = 32;
    std::int64_t input_w = 32;
    std::int64_t bottom_h = 8;  // top level is bottom / 2
    std::int64_t bottom_w = 8;
    std::int64_t latent_dim = 32;  // channel dim of both latent levels
    std::int64_t width = 12;       // CNN stem width (doubles per stage)
    std::int64_t d_model = 64;     // Transformer token dim
    std::int64_t num_heads = 2;
    std::int64_t num_blocks = 2;
    std::int64_t mlp_ratio = 2;

    std::int64_t top_h() const { return bottom_h / 2; }
    std::int64_t top_w() const { return bottom_w / 2; }

    /// Number of stride-2 stages between the input and the bottom level.
    std::int64_t stages() const {
        return std::countr_zero(static_cast<std::uint64_t>(input_h / bottom_h));
    }

    void validate() const {
        require(input_channels >= 1, "input channels must be positive");
        for (const std::int64_t v : {input_h, input_w, bottom_h, bottom_w}) {
            require(v >= 2 && std::has_single_bit(static_cast<std::uint64_t>(v)),
                    "spatial dims must be powers of two");
        }
        require(input_h % bottom_h == 0 && input_w % bottom_w == 0,
                "bottom level must divide the input resolution");
        require(input_h / bottom_h == input_w / bottom_w,
                "downsampling ratio must match on both axes");
        require(input_h > bottom_h, "bottom level must be strictly downsampled");
        require(latent_dim >= 1 && width >= 1, "channel widths must be positive");
        require(d_model >= num_heads && num_heads >= 1 && d_model % num_heads == 0,
                "head count must divide the token dim");
        require(num_blocks >= 1 && mlp_ratio >= 1, "transformer depth must be positive");
        require(d_model % (std::int64_t{1} << stages()) == 0,
                "token dim must stay integral through the upsampling tail");
    }

    static NetConfig desk_cnn() {
        NetConfig cfg;
        cfg.backbone = Backbone::kCnn;
        cfg.validate();
        return cfg;
    }

    static NetConfig desk_transformer() {
        NetConfig cfg;
        cfg.backbone = Backbone::kTransformer;
        cfg.validate();
        return cfg;
    }

    static NetConfig paper_cnn() {
        NetConfig cfg;
        cfg.backbone = Backbone::kCnn;
        cfg.bottom_h = 16;
        cfg.bottom_w = 16;
        cfg.width = 32;
        cfg.validate();
        return cfg;
    }

    static NetConfig paper_transformer() {
        NetConfig cfg;
        cfg.backbone = Backbone::kTransformer;
        cfg.bottom_h = 16;
        cfg.bottom_w = 16;
        cfg.d_model = 128;
        cfg.num_heads = 4;
        cfg.num_blocks = 4;
        cfg.validate();
        return cfg;
    }
};

/// Bottom latent [B, d, bh, bw] and top latent [B, d, bh/2, bw/2].
template <typename T>
struct LatentPair {
    NodePtr<T> bottom;
    NodePtr<T> top;
};

namespace detail {

template <typename T>
NodePtr<T> conv_bn_act(NetState<T>& st, const std::string& name, const NodePtr<T>& x,
                       std::int64_t co, std::int64_t k, std::int64_t stride, std::int64_t pad) {
    return grad::relu(batchnorm_layer(st, name + ".bn", conv_layer(st, name, x, co, k, stride, pad)));
}

template <typename T>
NodePtr<T> convt_bn_act(NetState<T>& st, const std::string& name, const NodePtr<T>& x,
                        std::int64_t co) {
    return grad::relu(
        batchnorm_layer(st, name + ".bn", conv_transpose_layer(st, name, x, co, 4, 2, 1)));
}

template <typename T>
LatentPair<T> encode_cnn(NetState<T>& st, const NetConfig& cfg, const NodePtr<T>& x, T snr_db) {
    auto f = conv_bn_act(st, "enc.stem", x, cfg.width, 3, 1, 1);
    f = snr_modnet(st, "enc.stem.mod", f, snr_db);
    for (std::int64_t i = 0; i < cfg.stages(); ++i) {
        const std::string name = "enc.down" + std::to_string(i);
        f = conv_bn_act(st, name, f, cfg.width << (i + 1), 4, 2, 1);
        f = snr_modnet(st, name + ".mod", f, snr_db);
    }

    LatentPair<T> latents;
    latents.bottom = conv_layer(st, "enc.bottom_head", f, cfg.latent_dim, 3, 1, 1);

    const std::int64_t cb = cfg.width << cfg.stages();
    auto t = conv_bn_act(st, "enc.top_down", f, cb, 4, 2, 1);
    t = snr_modnet(st, "enc.top_down.mod", t, snr_db);
    latents.top = conv_layer(st, "enc.top_head", t, cfg.latent_dim, 3, 1, 1);
    return latents;
}

template <typename T>
NodePtr<T> decode_cnn(NetState<T>& st, const NetConfig& cfg, const NodePtr<T>& top,
                      const NodePtr<T>& bottom, T snr_db) {
    const std::int64_t cb = cfg.width << cfg.stages();

    auto t = conv_bn_act(st, "dec.refine", top, cb, 3, 1, 1);
    t = snr_modnet(st, "dec.refine.mod", t, snr_db);
    t = convt_bn_act(st, "dec.top_up", t, cb / 2);

    auto b = conv_bn_act(st, "dec.bottom_in", bottom, cb / 2, 3, 1, 1);
    auto f = grad::concat<T>({t, b}, 1);
    f = conv_bn_act(st, "dec.fuse", f, cb, 3, 1, 1);
    f = snr_modnet(st, "dec.fuse.mod", f, snr_db);
    f = conv_bn_act(st, "dec.post", f, cb, 3, 1, 1);

    for (std::int64_t i = cfg.stages(); i >= 1; --i) {
        const std::string name = "dec.up" + std::to_string(i);
        f = convt_bn_act(st, name, f, cfg.width << (i - 1));
        f = snr_modnet(st, name + ".mod", f, snr_db);
    }
    return conv_layer(st, "dec.head", f, cfg.input_channels, 3, 1, 1);
}

template <typename T>
LatentPair<T> encode_transformer(NetState<T>& st, const NetConfig& cfg, const NodePtr<T>& x,
                                 T snr_db) {
    const std::int64_t B = x->value.dim(0);
    const std::int64_t patch = cfg.input_h / cfg.bottom_h;

    auto f = conv_layer(st, "enc.patch", x, cfg.d_model, patch, patch, 0);
    f = snr_modnet(st, "enc.patch.mod", f, snr_db);

    auto tokens = grad::bchw_to_tokens(f);
    tokens = add_positional(st, "enc.pos", tokens);
    auto tok = snr_token(st, "enc.snr_token", snr_db, B, cfg.d_model);
    for (std::int64_t i = 0; i < cfg.num_blocks; ++i) {
        tokens = transformer_block(st, "enc.block" + std::to_string(i), tokens, tok,
                                   cfg.num_heads, cfg.mlp_ratio);
    }
    tokens = layernorm_layer(st, "enc.final_ln", tokens);

    LatentPair<T> latents;
    auto bottom_tokens = tokens_linear(st, "enc.bottom_head", tokens, cfg.latent_dim);
    latents.bottom = grad::tokens_to_bchw(bottom_tokens, cfg.bottom_h, cfg.bottom_w);

    auto t = conv_bn_act(st, "enc.top_down", grad::tokens_to_bchw(tokens, cfg.bottom_h, cfg.bottom_w),
                         cfg.d_model, 4, 2, 1);
    auto top_tokens = tokens_linear(st, "enc.top_head",
                                    layernorm_layer(st, "enc.top_ln", grad::bchw_to_tokens(t)),
                                    cfg.latent_dim);
    latents.top = grad::tokens_to_bchw(top_tokens, cfg.top_h(), cfg.top_w());
    return latents;
}

template <typename T>
NodePtr<T> decode_transformer(NetState<T>& st, const NetConfig& cfg, const NodePtr<T>& top,
                              const NodePtr<T>& bottom, T snr_db) {
    const std::int64_t B = top->value.dim(0);

    auto t = conv_bn_act(st, "dec.refine", top, cfg.d_model, 3, 1, 1);
    t = snr_modnet(st, "dec.refine.mod", t, snr_db);
    t = convt_bn_act(st, "dec.top_up", t, cfg.d_model);

    auto b = conv_bn_act(st, "dec.bottom_in", bottom, cfg.d_model, 3, 1, 1);
    auto f = conv_bn_act(st, "dec.fuse", grad::concat<T>({t, b}, 1), cfg.d_model, 3, 1, 1);

    auto tokens = grad::bchw_to_tokens(f);
    tokens = add_positional(st, "dec.pos", tokens);
    auto tok = snr_token(st, "dec.snr_token", snr_db, B, cfg.d_model);
    for (std::int64_t i = 0; i < cfg.num_blocks; ++i) {
        tokens = transformer_block(st, "dec.block" + std::to_string(i), tokens, tok,
                                   cfg.num_heads, cfg.mlp_ratio);
    }
    tokens = layernorm_layer(st, "dec.final_ln", tokens);

    f = grad::tokens_to_bchw(tokens, cfg.bottom_h, cfg.bottom_w);
    f = snr_modnet(st, "dec.head.mod", f, snr_db);
    for (std::int64_t i = cfg.stages(); i >= 1; --i) {
        f = convt_bn_act(st, "dec.up" + std::to_string(i), f, cfg.d_model >> (cfg.stages() - i + 1));
    }
    return conv_layer(st, "dec.head", f, cfg.input_channels, 3, 1, 1);
}

}  // namespace detail

/// Two-level latents from a sparse CSI block [B, C, H, W].
template <typename T>
LatentPair<T> encode(NetState<T>& st, const NetConfig& cfg, const NodePtr<T>& x, T snr_db) {
    cfg.validate();
    require(x->value.rank() == 4 && x->value.dim(1) == cfg.input_channels &&
                x->value.dim(2) == cfg.input_h && x->value.dim(3) == cfg.input_w,
            "encode: input shape does not match the configured block");
    return cfg.backbone == Backbone::kCnn ? detail::encode_cnn(st, cfg, x, snr_db)
                                          : detail::encode_transformer(st, cfg, x, snr_db);
}

/// Sparse CSI block estimate from quantized latents.
template <typename T>
NodePtr<T> decode(NetState<T>& st, const NetConfig& cfg, const NodePtr<T>& top,
                  const NodePtr<T>& bottom, T snr_db) {
    cfg.validate();
    require(top->value.rank() == 4 && top->value.dim(1) == cfg.latent_dim &&
                top->value.dim(2) == cfg.top_h() && top->value.dim(3) == cfg.top_w(),
            "decode: top latent shape mismatch");
    require(bottom->value.rank() == 4 && bottom->value.dim(1) == cfg.latent_dim &&
                bottom->value.dim(2) == cfg.bottom_h && bottom->value.dim(3) == cfg.bottom_w,
            "decode: bottom latent shape mismatch");
    require(top->value.dim(0) == bottom->value.dim(0), "decode: latent batch sizes differ");
    return cfg.backbone == Backbone::kCnn ? detail::decode_cnn(st, cfg, top, bottom, snr_db)
                                          : detail::decode_transformer(st, cfg, top, bottom, snr_db);
}

}  // namespace vqcsi::nets

#endif  // VQCSI_NETS_MODEL_HPP
