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

#ifndef VQCSI_TRAIN_TRAINER_HPP
#define VQCSI_TRAIN_TRAINER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vqcsi/errors.hpp"
#include "vqcsi/grad/adam.hpp"
#include "vqcsi/grad/ops.hpp"
#include "vqcsi/grad/param_store.hpp"
#include "vqcsi/link/link.hpp"
#include "vqcsi/nets/model.hpp"
#include "vqcsi/rng.hpp"
#include "vqcsi/tensor.hpp"
#include "vqcsi/vq/vq.hpp"

namespace vqcsi::train {

enum class Level { kBottom, kTop };

/// How codebooks move during training: exponential-moving-average
/// maintenance (the reference scheme) or plain gradient descent on the
/// codebook distortion (the ablation baseline).
enum class CodebookUpdate { kEma, kGradient };

inline std::string to_string(CodebookUpdate u) {
    return u == CodebookUpdate::kEma ? "ema" : "gradient";
}

inline CodebookUpdate codebook_update_from_string(const std::string& s) {
    if (s == "ema") return CodebookUpdate::kEma;
    if (s == "gradient") return CodebookUpdate::kGradient;
    throw config_error("unknown codebook update '" + s + "' (expected ema|gradient)");
}

/// Per-index bit widths of the two quantizer levels; codebook sizes are
/// 2^bits. The feedback payload is bits * token count per level.
struct BitProfile {
    std::int64_t bottom_bits = 3;
    std::int64_t top_bits = 4;

    void validate() const {
        require(bottom_bits >= 1 && bottom_bits <= 16, "bit profile: bottom bits outside [1,16]");
        require(top_bits >= 1 && top_bits <= 16, "bit profile: top bits outside [1,16]");
    }

    std::int64_t bits_for(Level lvl) const {
        return lvl == Level::kBottom ? bottom_bits : top_bits;
    }

    std::int64_t codebook_size(Level lvl) const { return std::int64_t{1} << bits_for(lvl); }

    /// Total feedback payload in bits for the given token counts.
    std::int64_t total_bits(std::int64_t bottom_tokens, std::int64_t top_tokens) const {
        return bottom_tokens * bottom_bits + top_tokens * top_bits;
    }
};

struct TrainConfig {
    nets::NetConfig net = nets::NetConfig::desk_cnn();
    BitProfile bits{};
    CodebookUpdate codebook_update = CodebookUpdate::kEma;
    std::int64_t epochs = 30;
    std::int64_t batch_size = 64;
    double lr0 = 1e-3;
    double lambda1 = 1.0;   // quantization loss weight
    double lambda2 = 0.1;   // codebook usage entropy weight
    double beta = 0.25;     // commitment weight inside the quantization loss
    double rho = 0.99;      // EMA decay
    double snr_lo_db = 0.0;
    double snr_hi_db = 15.0;
    bool corrupt_training = true;  // pass indices through the flip surrogate
    std::uint64_t seed = 1;

    void validate() const {
        net.validate();
        bits.validate();
        require(epochs >= 1, "train config: epochs must be positive");
        require(batch_size >= 1, "train config: batch size must be positive");
        require(lr0 > 0.0, "train config: learning rate must be positive");
        require(lambda1 >= 0.0 && lambda2 >= 0.0 && beta >= 0.0,
                "train config: loss weights must be non-negative");
        require(rho >= 0.0 && rho < 1.0, "train config: EMA decay outside [0,1)");
        require(snr_lo_db <= snr_hi_db, "train config: SNR range inverted");
    }
};

namespace detail {

inline std::string level_key(Level lvl, const char* leaf) {
    return std::string("vq.") + (lvl == Level::kBottom ? "bottom" : "top") + "." + leaf;
}

}  // namespace detail

/// A trainable model: network parameters and buffers plus the two codebooks
/// and their EMA accumulators, all living in one named store so checkpoints
/// capture everything. Not copyable; nodes would alias.
template <typename T>
struct Model {
    nets::NetConfig net;
    BitProfile bits{};
    CodebookUpdate update = CodebookUpdate::kEma;
    T rho = T(0.99);
    grad::ParamStore<T> store;
    std::int64_t next_step = 0;
    bool codebooks_ready = false;

    Model() = default;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    grad::NodePtr<T> codebook(Level lvl) const { return store.at(detail::level_key(lvl, "codebook")); }
    grad::NodePtr<T> ema_size(Level lvl) const { return store.at(detail::level_key(lvl, "ema_size")); }
    grad::NodePtr<T> ema_sum(Level lvl) const { return store.at(detail::level_key(lvl, "ema_sum")); }

    std::int64_t tokens_per_sample(Level lvl) const {
        return lvl == Level::kBottom ? net.bottom_h * net.bottom_w : net.top_h() * net.top_w();
    }

    /// Feedback payload per sample in bits.
    std::int64_t payload_bits() const {
        return bits.total_bits(tokens_per_sample(Level::kBottom), tokens_per_sample(Level::kTop));
    }
};

/// Build a model with all parameters materialized (one forward on zeros in
/// eval mode, which touches no running statistics) and codebook storage
/// registered. Codebooks are trainable leaves only in gradient-update mode;
/// under EMA they are buffers, so the optimizer can never move them.
template <typename T>
Model<T> make_model(const TrainConfig& cfg) {
    cfg.validate();
    Model<T> m;
    m.net = cfg.net;
    m.bits = cfg.bits;
    m.update = cfg.codebook_update;
    m.rho = static_cast<T>(cfg.rho);

    Rng init_rng = Rng(cfg.seed).substream("init");
    nets::NetState<T> st{m.store, init_rng, false};
    auto zero = grad::constant(
        Tensor<T>({1, cfg.net.input_channels, cfg.net.input_h, cfg.net.input_w}));
    const nets::LatentPair<T> lat = nets::encode(st, cfg.net, zero, T(10));
    nets::decode(st, cfg.net, lat.top, lat.bottom, T(10));

    for (const Level lvl : {Level::kBottom, Level::kTop}) {
        const std::int64_t k = cfg.bits.codebook_size(lvl);
        const std::int64_t d = cfg.net.latent_dim;
        const auto cb_init = [&] { return Tensor<T>({k, d}); };
        if (m.update == CodebookUpdate::kGradient) {
            m.store.param(detail::level_key(lvl, "codebook"), cb_init);
        } else {
            m.store.buffer(detail::level_key(lvl, "codebook"), cb_init);
        }
        m.store.buffer(detail::level_key(lvl, "ema_size"),
                       [&] { return Tensor<T>::full({k}, T(1)); });
        m.store.buffer(detail::level_key(lvl, "ema_sum"), cb_init);
    }
    return m;
}

/// Weighted sum of the loss components: elementwise mean-squared
/// reconstruction error plus lambda1 * sum of per-level quantization terms
/// plus lambda2 * sum of per-level usage entropy terms. Zero weights drop
/// their terms from the graph entirely.
template <typename T>
grad::NodePtr<T> total_loss(const grad::NodePtr<T>& target, const grad::NodePtr<T>& recon,
                            const std::vector<grad::NodePtr<T>>& vq_terms,
                            const std::vector<grad::NodePtr<T>>& entropy_terms, T lambda1,
                            T lambda2) {
    auto loss = grad::mse(recon, target);
    if (lambda1 > T(0)) {
        for (const auto& v : vq_terms) loss = grad::add(loss, grad::scale(v, lambda1));
    }
    if (lambda2 > T(0)) {
        for (const auto& e : entropy_terms) loss = grad::add(loss, grad::scale(e, lambda2));
    }
    require(std::isfinite(static_cast<double>(loss->value[0])), "total loss: non-finite value");
    return loss;
}

/// One metrics row per optimizer step. Entropy columns hold the soft
/// surrogate values that enter the loss; perplexity comes from the hard
/// assignment histogram.
struct StepMetrics {
    std::int64_t step = 0;
    std::int64_t epoch = 0;
    double lr = 0;
    double snr_db = 0;
    double loss = 0;
    double mse = 0;
    double vq_bottom = 0;
    double vq_top = 0;
    double ent_bottom = 0;
    double ent_top = 0;
    double perp_bottom = 0;
    double perp_top = 0;
};

template <typename T>
struct TrainResult {
    Model<T> model;
    grad::Adam<T> adam;
    std::vector<StepMetrics> metrics;
};

namespace detail {

/// Seed-keyed Fisher-Yates permutation of [0, n).
inline std::vector<std::int64_t> permutation(std::int64_t n, Rng rng) {
    std::vector<std::int64_t> p(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(
            rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
        std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
}

/// Copy the selected sample rows of [N, C, H, W] into a batch tensor.
template <typename T>
Tensor<T> gather_batch(const Tensor<T>& samples, const std::vector<std::int64_t>& order,
                       std::int64_t first, std::int64_t count) {
    const std::int64_t stride = samples.numel() / samples.dim(0);
    Tensor<T> batch({count, samples.dim(1), samples.dim(2), samples.dim(3)});
    for (std::int64_t b = 0; b < count; ++b) {
        const std::int64_t src = order[static_cast<std::size_t>(first + b)];
        for (std::int64_t i = 0; i < stride; ++i) batch[b * stride + i] = samples[src * stride + i];
    }
    return batch;
}

/// Codebook rows selected by index, as a dense [M, d] tensor.
template <typename T>
Tensor<T> rows_for_indices(const Tensor<T>& codebook, const std::vector<std::uint32_t>& idx) {
    const std::int64_t d = codebook.dim(1);
    Tensor<T> out({static_cast<std::int64_t>(idx.size()), d});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto q = static_cast<std::int64_t>(idx[r]);
        for (std::int64_t j = 0; j < d; ++j)
            out[static_cast<std::int64_t>(r) * d + j] = codebook[q * d + j];
    }
    return out;
}

/// One EMA maintenance step against the store-resident accumulators.
template <typename T>
void apply_ema(Model<T>& model, Level lvl, const Tensor<T>& z,
               const std::vector<std::uint32_t>& idx) {
    vq::EmaState<T> state;
    state.cluster_size = model.ema_size(lvl)->value;
    state.embed_sum = model.ema_sum(lvl)->value;
    state.decay = model.rho;
    vq::ema_update(state, model.codebook(lvl)->value, z, idx);
    model.ema_size(lvl)->value = std::move(state.cluster_size);
    model.ema_sum(lvl)->value = std::move(state.embed_sum);
}

/// Latent feature map flattened to quantizer tokens [B*H*W, d].
template <typename T>
grad::NodePtr<T> flatten_tokens(const grad::NodePtr<T>& latent) {
    const std::int64_t B = latent->value.dim(0), C = latent->value.dim(1);
    const std::int64_t H = latent->value.dim(2), W = latent->value.dim(3);
    return grad::reshape(grad::bchw_to_tokens(latent), {B * H * W, C});
}

/// Tokens [B*H*W, d] back to the latent feature map layout.
template <typename T>
grad::NodePtr<T> unflatten_tokens(const grad::NodePtr<T>& tokens, std::int64_t batch,
                                  std::int64_t h, std::int64_t w) {
    const std::int64_t d = tokens->value.dim(1);
    return grad::tokens_to_bchw(grad::reshape(tokens, {batch, h * w, d}), h, w);
}

template <typename T>
struct LevelPass {
    grad::NodePtr<T> decoder_input;  // straight-through tokens in NCHW layout
    grad::NodePtr<T> vq_term;
    grad::NodePtr<T> entropy_term;
    double perplexity = 0;
};

/// Quantize one latent level: hard assignment, optional index corruption for
/// the decoder path, straight-through tokens, and the per-level loss nodes.
/// Clean assignments feed the quantization loss, the entropy surrogate, and
/// (via the returned indices) EMA maintenance; only the decoder sees the
/// corrupted codewords.
template <typename T>
LevelPass<T> quantize_level(Model<T>& model, Level lvl, const grad::NodePtr<T>& latent,
                            double ber, bool corrupt, Rng& corrupt_rng, T beta,
                            std::vector<std::uint32_t>& clean_indices_out,
                            Tensor<T>& clean_tokens_out) {
    auto flat = flatten_tokens(latent);
    auto cb = model.codebook(lvl);
    auto [idx, zq] = vq::quantize(flat->value, cb->value);

    std::vector<std::uint32_t> dec_idx = idx;
    if (corrupt && ber > 0.0) {
        dec_idx = link::corrupt_indices(idx, static_cast<int>(model.bits.bits_for(lvl)), ber,
                                        corrupt_rng);
    }
    Tensor<T> zq_dec =
        (corrupt && ber > 0.0) ? rows_for_indices(cb->value, dec_idx) : zq;

    LevelPass<T> pass;
    const std::int64_t B = latent->value.dim(0);
    pass.decoder_input = unflatten_tokens(vq::ste_pass(flat, std::move(zq_dec)), B,
                                          latent->value.dim(2), latent->value.dim(3));
    if (model.update == CodebookUpdate::kGradient) {
        // same value split as the EMA-mode loss node, but the codebook term
        // carries gradients so the optimizer can move the codewords
        auto commit = grad::scale(
            grad::sum_all(grad::square(grad::sub(flat, grad::constant(zq)))),
            beta / static_cast<T>(flat->value.dim(0)));
        pass.vq_term = grad::add(commit, vq::codebook_loss_node(cb, flat->value, idx));
    } else {
        pass.vq_term = vq::vq_loss_node(flat, zq, beta);
    }
    pass.entropy_term = vq::entropy_loss_node(flat, cb);
    pass.perplexity = static_cast<double>(vq::perplexity(
        vq::usage_histogram<T>(idx, model.bits.codebook_size(lvl))));

    clean_indices_out = std::move(idx);
    clean_tokens_out = flat->value;
    return pass;
}

/// k-means++ codebook seeding from the first training batch's latents,
/// computed with a side-effect-free eval forward at the mid-range SNR.
template <typename T>
void init_codebooks(const TrainConfig& cfg, Model<T>& model, const Tensor<T>& samples) {
    const Rng root(cfg.seed);
    const auto order = permutation(samples.dim(0), root.substream("order", 0));
    const Tensor<T> batch = gather_batch(samples, order, 0, cfg.batch_size);

    Rng unused(0);
    nets::NetState<T> st{model.store, unused, false};
    const T mid = static_cast<T>(0.5 * (cfg.snr_lo_db + cfg.snr_hi_db));
    const nets::LatentPair<T> lat = nets::encode(st, cfg.net, grad::constant(batch), mid);

    std::uint64_t stream_index = 0;
    for (const Level lvl : {Level::kBottom, Level::kTop}) {
        const auto& latent = lvl == Level::kBottom ? lat.bottom : lat.top;
        const Tensor<T> tokens = flatten_tokens(latent)->value;
        Rng rng = root.substream("kmeans", stream_index++);
        model.codebook(lvl)->value =
            vq::init_codebook(tokens, model.bits.codebook_size(lvl), rng);
        // seed the accumulators so embed_sum / cluster_size reproduces the
        // freshly initialized codebook
        model.ema_size(lvl)->value = Tensor<T>::full({model.bits.codebook_size(lvl)}, T(1));
        model.ema_sum(lvl)->value = model.codebook(lvl)->value;
    }
    model.codebooks_ready = true;
}

inline void require_finite(const TrainConfig& cfg, const StepMetrics& row) {
    if (std::isfinite(row.loss) && std::isfinite(row.mse) && std::isfinite(row.vq_bottom) &&
        std::isfinite(row.vq_top) && std::isfinite(row.ent_bottom) &&
        std::isfinite(row.ent_top)) {
        return;
    }
    std::ostringstream msg;
    msg << "training diverged: non-finite loss at step " << row.step << " (epoch " << row.epoch
        << ", lr " << row.lr << ", snr " << row.snr_db << " dB): loss=" << row.loss
        << " mse=" << row.mse << " vq=[" << row.vq_bottom << ", " << row.vq_top << "] ent=["
        << row.ent_bottom << ", " << row.ent_top << "] lr0=" << cfg.lr0;
    throw contract_error(msg.str());
}

}  // namespace detail

/// Mixed-SNR uniform draw for one optimizer step; keyed by the absolute step
/// index so a resumed run replays the identical sequence.
inline double snr_for_step(const TrainConfig& cfg, std::int64_t step) {
    Rng rng = Rng(cfg.seed).substream("snr", static_cast<std::uint64_t>(step));
    return rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db);
}

/// Advance training from model.next_step until the configured step count or
/// `step_limit` (absolute step index), whichever is lower. All per-step
/// randomness is keyed by absolute step/epoch indices, so trajectories are
/// deterministic and checkpoint resume is exact.
template <typename T>
void train_steps(const TrainConfig& cfg, const Tensor<T>& samples, Model<T>& model,
                 grad::Adam<T>& adam, std::vector<StepMetrics>& metrics,
                 std::int64_t step_limit = -1) {
    cfg.validate();
    require(samples.rank() == 4 && samples.dim(1) == cfg.net.input_channels &&
                samples.dim(2) == cfg.net.input_h && samples.dim(3) == cfg.net.input_w,
            "train: sample tensor does not match the configured input block");
    require(samples.dim(0) >= cfg.batch_size, "train: need at least one full batch of samples");
    require(model.net.backbone == cfg.net.backbone, "train: model/config backbone mismatch");

    const std::int64_t batches_per_epoch = samples.dim(0) / cfg.batch_size;
    const std::int64_t total_steps = cfg.epochs * batches_per_epoch;
    const std::int64_t stop =
        step_limit < 0 ? total_steps : std::min(step_limit, total_steps);

    if (!model.codebooks_ready) {
        require(model.next_step == 0, "train: codebooks missing on a resumed model");
        detail::init_codebooks(cfg, model, samples);
    }

    const Rng root(cfg.seed);
    Rng unused(0);
    std::vector<std::int64_t> order;
    std::int64_t order_epoch = -1;

    for (std::int64_t step = model.next_step; step < stop; ++step) {
        const std::int64_t epoch = step / batches_per_epoch;
        const std::int64_t batch_index = step % batches_per_epoch;
        if (epoch != order_epoch) {
            order = detail::permutation(samples.dim(0),
                                        root.substream("order", static_cast<std::uint64_t>(epoch)));
            order_epoch = epoch;
        }
        const Tensor<T> batch = detail::gather_batch(samples, order,
                                                     batch_index * cfg.batch_size, cfg.batch_size);
        const double snr_db = snr_for_step(cfg, step);
        const double ber = link::qpsk_ber(snr_db);
        Rng corrupt_rng = root.substream("corrupt", static_cast<std::uint64_t>(step));

        nets::NetState<T> st{model.store, unused, true};
        auto x = grad::constant(batch);
        const nets::LatentPair<T> lat = nets::encode(st, cfg.net, x, static_cast<T>(snr_db));

        std::vector<std::uint32_t> idx_bottom, idx_top;
        Tensor<T> tokens_bottom, tokens_top;
        auto bottom = detail::quantize_level(model, Level::kBottom, lat.bottom, ber,
                                             cfg.corrupt_training, corrupt_rng,
                                             static_cast<T>(cfg.beta), idx_bottom, tokens_bottom);
        auto top = detail::quantize_level(model, Level::kTop, lat.top, ber, cfg.corrupt_training,
                                          corrupt_rng, static_cast<T>(cfg.beta), idx_top,
                                          tokens_top);

        auto recon = nets::decode(st, cfg.net, top.decoder_input, bottom.decoder_input,
                                  static_cast<T>(snr_db));
        auto mse_node = grad::mse(recon, x);
        auto loss = mse_node;
        if (cfg.lambda1 > 0) {
            loss = grad::add(loss, grad::scale(bottom.vq_term, static_cast<T>(cfg.lambda1)));
            loss = grad::add(loss, grad::scale(top.vq_term, static_cast<T>(cfg.lambda1)));
        }
        if (cfg.lambda2 > 0) {
            loss = grad::add(loss, grad::scale(bottom.entropy_term, static_cast<T>(cfg.lambda2)));
            loss = grad::add(loss, grad::scale(top.entropy_term, static_cast<T>(cfg.lambda2)));
        }

        StepMetrics row;
        row.step = step;
        row.epoch = epoch;
        row.lr = static_cast<double>(grad::cosine_lr(static_cast<T>(cfg.lr0), step, total_steps));
        row.snr_db = snr_db;
        row.loss = static_cast<double>(loss->value[0]);
        row.mse = static_cast<double>(mse_node->value[0]);
        row.vq_bottom = static_cast<double>(bottom.vq_term->value[0]);
        row.vq_top = static_cast<double>(top.vq_term->value[0]);
        row.ent_bottom = static_cast<double>(bottom.entropy_term->value[0]);
        row.ent_top = static_cast<double>(top.entropy_term->value[0]);
        row.perp_bottom = bottom.perplexity;
        row.perp_top = top.perplexity;
        detail::require_finite(cfg, row);

        grad::backward(loss);
        adam.step(model.store, static_cast<T>(row.lr));

        if (model.update == CodebookUpdate::kEma) {
            detail::apply_ema(model, Level::kBottom, tokens_bottom, idx_bottom);
            detail::apply_ema(model, Level::kTop, tokens_top, idx_top);
        }
        metrics.push_back(row);
        model.next_step = step + 1;
    }
}

/// Train a fresh model to completion.
template <typename T>
TrainResult<T> train(const TrainConfig& cfg, const Tensor<T>& samples) {
    TrainResult<T> result;
    result.model = make_model<T>(cfg);
    train_steps(cfg, samples, result.model, result.adam, result.metrics);
    return result;
}

namespace detail {

template <typename T>
void put_shape_meta(grad::Checkpoint<T>& ck, const Model<T>& model) {
    const auto& n = model.net;
    ck.meta["backbone"] = nets::to_string(n.backbone);
    ck.meta["input_channels"] = std::to_string(n.input_channels);
    ck.meta["input_h"] = std::to_string(n.input_h);
    ck.meta["input_w"] = std::to_string(n.input_w);
    ck.meta["bottom_h"] = std::to_string(n.bottom_h);
    ck.meta["bottom_w"] = std::to_string(n.bottom_w);
    ck.meta["latent_dim"] = std::to_string(n.latent_dim);
    ck.meta["width"] = std::to_string(n.width);
    ck.meta["d_model"] = std::to_string(n.d_model);
    ck.meta["num_heads"] = std::to_string(n.num_heads);
    ck.meta["num_blocks"] = std::to_string(n.num_blocks);
    ck.meta["mlp_ratio"] = std::to_string(n.mlp_ratio);
    ck.meta["bottom_bits"] = std::to_string(model.bits.bottom_bits);
    ck.meta["top_bits"] = std::to_string(model.bits.top_bits);
    ck.meta["codebook_update"] = to_string(model.update);
}

template <typename T>
void expect_meta(const grad::Checkpoint<T>& ck, const std::string& key,
                 const std::string& want) {
    const auto it = ck.meta.find(key);
    require(it != ck.meta.end(), "checkpoint: missing metadata key '" + key + "'");
    require(it->second == want, "checkpoint: metadata mismatch for '" + key + "': checkpoint has '" +
                                    it->second + "', model expects '" + want + "'");
}

}  // namespace detail

/// Serialize the full training state: every store entry (parameters and
/// buffers, codebooks and EMA accumulators included), optimizer moments, and
/// the resume cursor.
template <typename T>
void save_model_checkpoint(const std::string& path, const Model<T>& model,
                           const grad::Adam<T>& adam) {
    grad::Checkpoint<T> ck;
    detail::put_shape_meta(ck, model);
    ck.meta["next_step"] = std::to_string(model.next_step);
    ck.meta["codebooks_ready"] = model.codebooks_ready ? "1" : "0";
    for (const auto& name : model.store.names()) {
        ck.arrays.push_back({model.store.trainable(name) ? 'p' : 'b', name,
                             model.store.at(name)->value});
    }
    adam.save_into(ck);
    grad::save_checkpoint(path, ck);
}

/// Restore into a model materialized from the same configuration. All shape
/// metadata is validated first and the array restore stages before writing,
/// so a mismatched checkpoint cannot leave partial state.
template <typename T>
void restore_model_checkpoint(const std::string& path, Model<T>& model, grad::Adam<T>& adam) {
    const grad::Checkpoint<T> ck = grad::load_checkpoint<T>(path);
    grad::Checkpoint<T> want;
    detail::put_shape_meta(want, model);
    for (const auto& [key, value] : want.meta) detail::expect_meta(ck, key, value);

    grad::restore_into(model.store, ck);
    adam.restore_from(ck);
    const auto it = ck.meta.find("next_step");
    require(it != ck.meta.end(), "checkpoint: missing next_step");
    model.next_step = std::stoll(it->second);
    const auto rit = ck.meta.find("codebooks_ready");
    model.codebooks_ready = rit != ck.meta.end() && rit->second == "1";
}

}  // namespace vqcsi::train

#endif  // VQCSI_TRAIN_TRAINER_HPP
