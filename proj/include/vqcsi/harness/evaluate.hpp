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
// Evaluation of trained models: channel-free reconstruction quality and the
// full digital feedback pipeline (quantize, modulate, AWGN, demodulate,
// dequantize, decode), plus the codebook-update ablation driver.

#ifndef VQCSI_HARNESS_EVALUATE_HPP
#define VQCSI_HARNESS_EVALUATE_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vqcsi/errors.hpp"
#include "vqcsi/grad/graph.hpp"
#include "vqcsi/grad/ops.hpp"
#include "vqcsi/harness/experiment.hpp"
#include "vqcsi/harness/sweep.hpp"
#include "vqcsi/link/link.hpp"
#include "vqcsi/nets/model.hpp"
#include "vqcsi/rng.hpp"
#include "vqcsi/tensor.hpp"
#include "vqcsi/train/trainer.hpp"
#include "vqcsi/vq/vq.hpp"

namespace vqcsi::harness {

namespace detail {

template <typename To, typename From>
Tensor<To> cast_tensor(const Tensor<From>& src) {
    Tensor<To> out(src.shape());
    for (std::int64_t i = 0; i < src.numel(); ++i) out[i] = static_cast<To>(src[i]);
    return out;
}

/// Codebook rows selected by index, as a dense [M, d] tensor.
template <typename T>
Tensor<T> select_rows(const Tensor<T>& codebook, const std::vector<std::uint32_t>& idx) {
    const std::int64_t d = codebook.dim(1);
    Tensor<T> out({static_cast<std::int64_t>(idx.size()), d});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::int64_t j = 0; j < d; ++j) {
            out[static_cast<std::int64_t>(r) * d + j] =
                codebook[static_cast<std::int64_t>(idx[r]) * d + j];
        }
    }
    return out;
}

/// Token rows [B*H*W, d] placed back into the latent's NCHW layout.
template <typename T>
grad::NodePtr<T> tokens_as_latent(Tensor<T> tokens, std::int64_t batch, std::int64_t h,
                                  std::int64_t w) {
    const std::int64_t d = tokens.dim(1);
    auto node = grad::constant(tokens.reshaped({batch, h * w, d}));
    return grad::tokens_to_bchw(node, h, w);
}

/// Copy of sample rows [first, first+count) of an [N, ...] tensor.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& samples, std::int64_t first, std::int64_t count) {
    std::vector<std::int64_t> shape(samples.shape());
    shape[0] = count;
    Tensor<T> out(std::move(shape));
    const std::int64_t stride = samples.numel() / samples.dim(0);
    std::copy(samples.data() + first * stride, samples.data() + (first + count) * stride,
              out.data());
    return out;
}

}  // namespace detail

/// Evaluate one test-SNR point of a trained model over `samples`. With
/// `through_channel` the indices of both levels ride the QPSK/AWGN modem
/// (uncoded) `trials` times per batch; otherwise the decoder sees the clean
/// assignments and the index error rate is exactly zero. The SNR conditions
/// the network in both cases. Perplexities come from the clean assignment
/// histograms of the whole set.
template <typename T>
SweepPoint evaluate_point(train::Model<T>& model, const Tensor<T>& samples, double snr_db,
                          std::int64_t trials, bool through_channel, Rng stream,
                          std::string model_id, std::int64_t batch_size) {
    require(samples.rank() == 4 && samples.dim(0) >= 1, "evaluate: need [n,2,h,w] samples");
    require(samples.dim(1) == model.net.input_channels && samples.dim(2) == model.net.input_h &&
                samples.dim(3) == model.net.input_w,
            "evaluate: sample tensor does not match the model's input block");
    require(trials >= 1, "evaluate: need at least one trial");
    require(batch_size >= 1, "evaluate: batch size must be positive");
    require(model.codebooks_ready, "evaluate: model has no trained codebooks");

    const std::int64_t n = samples.dim(0);
    const std::int64_t sample_elems = samples.numel() / n;
    std::vector<std::uint32_t> clean_bottom, clean_top;

    Rng unused(0);
    std::vector<double> ratios;
    std::int64_t wrong = 0, total = 0;

    for (std::int64_t first = 0; first < n; first += batch_size) {
        const std::int64_t count = std::min(batch_size, n - first);
        const Tensor<T> batch = detail::slice_rows(samples, first, count);
        auto x = grad::constant(batch);

        nets::NetState<T> st{model.store, unused, false};
        const nets::LatentPair<T> lat = nets::encode(st, model.net, x, static_cast<T>(snr_db));

        const auto flat = [](const grad::NodePtr<T>& latent) {
            const std::int64_t B = latent->value.dim(0), C = latent->value.dim(1);
            const std::int64_t H = latent->value.dim(2), W = latent->value.dim(3);
            return grad::reshape(grad::bchw_to_tokens(latent), {B * H * W, C})->value;
        };
        const Tensor<T> tokens_bottom = flat(lat.bottom);
        const Tensor<T> tokens_top = flat(lat.top);
        const auto [idx_bottom, zq_bottom] =
            vq::quantize(tokens_bottom, model.codebook(train::Level::kBottom)->value);
        const auto [idx_top, zq_top] =
            vq::quantize(tokens_top, model.codebook(train::Level::kTop)->value);
        clean_bottom.insert(clean_bottom.end(), idx_bottom.begin(), idx_bottom.end());
        clean_top.insert(clean_top.end(), idx_top.begin(), idx_top.end());

        const std::int64_t effective_trials = through_channel ? trials : 1;
        for (std::int64_t t = 0; t < effective_trials; ++t) {
            Tensor<T> dec_bottom = zq_bottom;
            Tensor<T> dec_top = zq_top;
            if (through_channel) {
                link::LinkConfig link_cfg;
                link_cfg.snr_db = snr_db;
                const auto rx_bottom = link::transmit_indices(
                    idx_bottom, static_cast<int>(model.bits.bits_for(train::Level::kBottom)),
                    link_cfg, stream);
                const auto rx_top = link::transmit_indices(
                    idx_top, static_cast<int>(model.bits.bits_for(train::Level::kTop)), link_cfg,
                    stream);
                for (std::size_t i = 0; i < rx_bottom.size(); ++i) wrong += rx_bottom[i] != idx_bottom[i];
                for (std::size_t i = 0; i < rx_top.size(); ++i) wrong += rx_top[i] != idx_top[i];
                total += static_cast<std::int64_t>(rx_bottom.size() + rx_top.size());
                dec_bottom = detail::select_rows(model.codebook(train::Level::kBottom)->value,
                                                 rx_bottom);
                dec_top = detail::select_rows(model.codebook(train::Level::kTop)->value, rx_top);
            }

            auto bottom_in = detail::tokens_as_latent(std::move(dec_bottom), count,
                                                      model.net.bottom_h, model.net.bottom_w);
            auto top_in = detail::tokens_as_latent(std::move(dec_top), count, model.net.top_h(),
                                                   model.net.top_w());
            nets::NetState<T> dec_st{model.store, unused, false};
            auto recon =
                nets::decode(dec_st, model.net, top_in, bottom_in, static_cast<T>(snr_db));

            for (std::int64_t s = 0; s < count; ++s) {
                double err_acc = 0, norm_acc = 0;
                const T* xv = batch.data() + s * sample_elems;
                const T* rv = recon->value.data() + s * sample_elems;
                for (std::int64_t i = 0; i < sample_elems; ++i) {
                    const double diff = static_cast<double>(rv[i]) - static_cast<double>(xv[i]);
                    err_acc += diff * diff;
                    norm_acc += static_cast<double>(xv[i]) * static_cast<double>(xv[i]);
                }
                require(norm_acc > 0, "evaluate: zero-norm sample");
                ratios.push_back(err_acc / norm_acc);
            }
        }
    }

    SweepPoint p;
    p.snr_test_db = snr_db;
    p.feedback_bits = model.payload_bits();
    p.nmse_db = nmse_db_from_ratios(ratios);
    p.index_error_rate =
        through_channel ? static_cast<double>(wrong) / static_cast<double>(total) : 0.0;
    p.model_id = std::move(model_id);
    p.perp_bottom = vq::perplexity(vq::usage_histogram<double>(
        clean_bottom, model.bits.codebook_size(train::Level::kBottom)));
    p.perp_top = vq::perplexity(
        vq::usage_histogram<double>(clean_top, model.bits.codebook_size(train::Level::kTop)));
    return p;
}

/// Sweep over a list of test SNRs; every point draws from its own substream
/// of `seed`, so the table is reproducible and points are order-independent.
/// Rows come back sorted by (feedback_bits, snr).
template <typename T>
std::vector<SweepPoint> evaluate_sweep(train::Model<T>& model, const Tensor<T>& samples,
                                       const std::vector<double>& snr_list, std::int64_t trials,
                                       bool through_channel, std::uint64_t seed,
                                       const std::string& model_id, std::int64_t batch_size) {
    require(!snr_list.empty(), "evaluate: empty snr list");
    const Rng root(seed);
    std::vector<SweepPoint> points;
    for (std::size_t i = 0; i < snr_list.size(); ++i) {
        points.push_back(evaluate_point(model, samples, snr_list[i], trials, through_channel,
                                        root.substream("sweep", i), model_id, batch_size));
    }
    sort_sweep(points);
    return points;
}

/// One codebook-update ablation arm: which update rule and which entropy
/// weight to train with.
struct AblationArm {
    std::string name;
    train::CodebookUpdate update;
    double lambda2;
};

/// The three standard arms: the full method, EMA without the usage-entropy
/// regularizer, and plain gradient codebook updates (entropy kept, so the
/// arms differ from "full" in exactly one ingredient each).
inline std::vector<AblationArm> ablation_arms(double lambda2) {
    return {{"full", train::CodebookUpdate::kEma, lambda2},
            {"ema_only", train::CodebookUpdate::kEma, 0.0},
            {"gradient_only", train::CodebookUpdate::kGradient, lambda2}};
}

struct AblationRow {
    std::string arm;
    std::uint64_t seed = 0;
    SweepPoint point;
};

/// Train every (arm, seed) pair on `train_samples` under matched seeds and
/// evaluate each over the digital pipeline on `eval_samples`.
template <typename T>
std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg,
                                      const Tensor<T>& train_samples,
                                      const Tensor<T>& eval_samples) {
    std::vector<AblationRow> rows;
    for (const AblationArm& arm : ablation_arms(cfg.train.lambda2)) {
        for (const std::uint64_t seed : cfg.ablate_seeds) {
            train::TrainConfig tc = cfg.train;
            tc.codebook_update = arm.update;
            tc.lambda2 = arm.lambda2;
            tc.seed = seed;
            auto result = train::train(tc, train_samples);
            const std::string model_id = arm.name + "_s" + std::to_string(seed);
            auto points =
                evaluate_sweep(result.model, eval_samples, cfg.snr_list, cfg.trials, true,
                               seed, model_id, cfg.train.batch_size);
            for (auto& p : points) {
                AblationRow row;
                row.arm = arm.name;
                row.seed = seed;
                row.point = std::move(p);
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

}  // namespace vqcsi::harness

#endif  // VQCSI_HARNESS_EVALUATE_HPP
