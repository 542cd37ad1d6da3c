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
// Named layer helpers over the autodiff ops: parameters are created on
// first use in a ParamStore, so a forward pass both defines and reuses
// the model.

#ifndef VQCSI_NETS_LAYERS_HPP
#define VQCSI_NETS_LAYERS_HPP

#include <cmath>
#include <string>
#include <vector>

#include "vqcsi/grad/conv.hpp"
#include "vqcsi/grad/ops.hpp"
#include "vqcsi/grad/param_store.hpp"
#include "vqcsi/rng.hpp"

namespace vqcsi::nets {

using grad::NodePtr;
using grad::ParamStore;

/// Shared context threaded through layer builders.
template <typename T>
struct NetState {
    ParamStore<T>& store;
    Rng& init_rng;
    bool training = true;
};

namespace detail {

template <typename T>
Tensor<T> he_init(const std::vector<std::int64_t>& shape, std::int64_t fan_in, Rng& rng) {
    const T dev = static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in)));
    return Tensor<T>::normal(shape, dev, rng);
}

}  // namespace detail

/// 2-D convolution with bias; weight [co, ci, k, k].
template <typename T>
NodePtr<T> conv_layer(NetState<T>& st, const std::string& name, const NodePtr<T>& x,
                      std::int64_t co, std::int64_t k, std::int64_t stride, std::int64_t pad) {
    const std::int64_t ci = x->value.dim(1);
    auto w = st.store.param(name + ".w", [&] {
        return detail::he_init<T>({co, ci, k, k}, ci * k * k, st.init_rng);
    });
    auto b = st.store.param(name + ".b", [&] { return Tensor<T>({co}); });
    return grad::add_bias_channels(grad::conv2d(x, w, stride, pad), b);
}

/// Transposed 2-D convolution with bias; weight [ci, co, k, k].
template <typename T>
NodePtr<T> conv_transpose_layer(NetState<T>& st, const std::string& name, const NodePtr<T>& x,
                                std::int64_t co, std::int64_t k, std::int64_t stride,
                                std::int64_t pad) {
    const std::int64_t ci = x->value.dim(1);
    auto w = st.store.param(name + ".w", [&] {
        return detail::he_init<T>({ci, co, k, k}, ci * k * k, st.init_rng);
    });
    auto b = st.store.param(name + ".b", [&] { return Tensor<T>({co}); });
    return grad::add_bias_channels(grad::conv_transpose2d(x, w, stride, pad), b);
}

/// Batch normalization with trainable affine and persistent running stats.
template <typename T>
NodePtr<T> batchnorm_layer(NetState<T>& st, const std::string& name, const NodePtr<T>& x) {
    const std::int64_t c = x->value.dim(1);
    auto gain = st.store.param(name + ".gain", [&] { return Tensor<T>::full({c}, T(1)); });
    auto bias = st.store.param(name + ".bias", [&] { return Tensor<T>({c}); });
    auto mean = st.store.buffer(name + ".running_mean", [&] { return Tensor<T>({c}); });
    auto var = st.store.buffer(name + ".running_var", [&] { return Tensor<T>::full({c}, T(1)); });
    return grad::batchnorm2d(x, gain, bias, mean->value, var->value, st.training);
}

/// Dense layer on [rows, in] with bias.
template <typename T>
NodePtr<T> linear_layer(NetState<T>& st, const std::string& name, const NodePtr<T>& x,
                        std::int64_t out) {
    const std::int64_t in = x->value.dim(x->value.rank() - 1);
    auto w = st.store.param(name + ".w",
                            [&] { return detail::he_init<T>({in, out}, in, st.init_rng); });
    auto b = st.store.param(name + ".b", [&] { return Tensor<T>({out}); });
    return grad::add_bias_lastdim(grad::matmul(x, w), b);
}

/// Dense layer applied per token of [B, L, in].
template <typename T>
NodePtr<T> tokens_linear(NetState<T>& st, const std::string& name, const NodePtr<T>& x,
                         std::int64_t out) {
    const std::int64_t B = x->value.dim(0), L = x->value.dim(1), D = x->value.dim(2);
    auto flat = grad::reshape(x, {B * L, D});
    return grad::reshape(linear_layer(st, name, flat, out), {B, L, out});
}

/// Layer normalization over the last axis with trainable affine.
template <typename T>
NodePtr<T> layernorm_layer(NetState<T>& st, const std::string& name, const NodePtr<T>& x) {
    const std::int64_t d = x->value.dim(x->value.rank() - 1);
    auto gain = st.store.param(name + ".gain", [&] { return Tensor<T>::full({d}, T(1)); });
    auto bias = st.store.param(name + ".bias", [&] { return Tensor<T>({d}); });
    return grad::layernorm(x, gain, bias);
}

/// Constant input node [rows, 1] carrying the normalized SNR value.
template <typename T>
NodePtr<T> snr_input(T snr_db, std::int64_t rows) {
    return grad::constant(Tensor<T>::full({rows, 1}, snr_db / T(10)));
}

/// SNR modulation of a feature map: a channel gate driven by pooled
/// features and the SNR embedding, plus a two-conv residual branch.
/// out = F * sigmoid(W [gmp(F) || MLP(snr)]) + Conv(ReLU(Conv(F))).
template <typename T>
NodePtr<T> snr_modnet(NetState<T>& st, const std::string& name, const NodePtr<T>& x, T snr_db) {
    require(x->value.rank() == 4, "snr_modnet: expected NCHW input");
    const std::int64_t B = x->value.dim(0), C = x->value.dim(1);

    auto pooled = grad::global_mean_pool(x);
    auto snr = snr_input<T>(snr_db, B);
    auto embed = linear_layer(st, name + ".snr2",
                              grad::relu(linear_layer(st, name + ".snr1", snr, C)), C);
    auto gate = grad::sigmoid(
        linear_layer(st, name + ".gate", grad::concat<T>({pooled, embed}, 1), C));

    auto residual = conv_layer(st, name + ".res2",
                               grad::relu(conv_layer(st, name + ".res1", x, C, 3, 1, 1)), C, 3, 1, 1);
    return grad::add(grad::mul_channels(x, gate), residual);
}

/// SNR token [B, 1, d]: Linear -> LayerNorm -> ReLU on the normalized SNR.
template <typename T>
NodePtr<T> snr_token(NetState<T>& st, const std::string& name, T snr_db, std::int64_t batch,
                     std::int64_t d) {
    auto t = linear_layer(st, name + ".embed", snr_input<T>(snr_db, batch), d);
    t = grad::relu(layernorm_layer(st, name + ".ln", t));
    return grad::reshape(t, {batch, 1, d});
}

/// Pre-norm Transformer block over [B, L, d]: the SNR token is prepended
/// for the duration of the block and stripped again afterwards.
template <typename T>
NodePtr<T> transformer_block(NetState<T>& st, const std::string& name, const NodePtr<T>& x,
                             const NodePtr<T>& snr_tok, std::int64_t num_heads,
                             std::int64_t mlp_ratio) {
    const std::int64_t L = x->value.dim(1), D = x->value.dim(2);
    require(D % num_heads == 0, "transformer_block: head count must divide the model dim");
    const std::int64_t dk = D / num_heads;
    const T inv_sqrt_dk = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dk)));

    auto h = grad::concat<T>({snr_tok, x}, 1);  // [B, L+1, D]

    auto a = layernorm_layer(st, name + ".ln1", h);
    auto q = tokens_linear(st, name + ".q", a, D);
    auto k = tokens_linear(st, name + ".k", a, D);
    auto v = tokens_linear(st, name + ".v", a, D);

    std::vector<NodePtr<T>> heads;
    for (std::int64_t hd = 0; hd < num_heads; ++hd) {
        auto qh = grad::slice(q, 2, hd * dk, dk);
        auto kh = grad::slice(k, 2, hd * dk, dk);
        auto vh = grad::slice(v, 2, hd * dk, dk);
        auto scores = grad::scale(grad::bmm(qh, grad::transpose_last2(kh)), inv_sqrt_dk);
        heads.push_back(grad::bmm(grad::softmax_lastdim(scores), vh));
    }
    auto ctx = (num_heads == 1) ? heads[0] : grad::concat<T>(heads, 2);
    h = grad::add(h, tokens_linear(st, name + ".proj", ctx, D));

    auto m = layernorm_layer(st, name + ".ln2", h);
    m = tokens_linear(st, name + ".mlp2",
                      grad::relu(tokens_linear(st, name + ".mlp1", m, D * mlp_ratio)), D);
    h = grad::add(h, m);

    return grad::slice(h, 1, 1, L);  // strip the SNR prefix
}

/// Learned additive positional embedding for [B, L, d] tokens (zero-init).
template <typename T>
NodePtr<T> add_positional(NetState<T>& st, const std::string& name, const NodePtr<T>& x) {
    const std::int64_t L = x->value.dim(1), D = x->value.dim(2);
    auto p = st.store.param(name, [&] { return Tensor<T>({L, D}); });
    return grad::add_broadcast0(x, p);
}

}  // namespace vqcsi::nets

#endif  // VQCSI_NETS_LAYERS_HPP
