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
// Vector quantization core: nearest-codeword lookup, straight-through
// bridging, commitment loss, usage-entropy regularization, EMA codebook
// maintenance, and k-means++ seeding.
//
// The codebook is not a gradient parameter in the default (EMA) mode: the
// quantization loss node carries the full monitored value but only its
// commitment term routes gradient, and that goes to the encoder side.

#ifndef VQCSI_VQ_VQ_HPP
#define VQCSI_VQ_VQ_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "vqcsi/grad/ops.hpp"
#include "vqcsi/rng.hpp"

namespace vqcsi::vq {

/// Per-codeword accumulated cluster sizes and embedding sums.
template <typename T>
struct EmaState {
    Tensor<T> cluster_size;  // [K]
    Tensor<T> embed_sum;     // [K x d]
    T decay;                 // in (0,1) for running averages, 0 for plain k-means steps

    static EmaState from_codebook(const Tensor<T>& codebook, T decay) {
        require(codebook.rank() == 2, "ema: codebook must be [K x d]");
        EmaState s;
        const std::int64_t k = codebook.dim(0);
        s.cluster_size = Tensor<T>::full({k}, T(1));
        s.embed_sum = codebook;  // so embed_sum / cluster_size reproduces the codebook
        s.decay = decay;
        return s;
    }
};

template <typename T>
void validate_codebook(const Tensor<T>& cb) {
    require(cb.rank() == 2, "vq: codebook must be [K x d]");
    const auto k = cb.dim(0);
    require(k >= 2 && std::has_single_bit(static_cast<std::uint64_t>(k)),
            "vq: codebook size must be a power of two >= 2");
}

/// Nearest codeword per row of Z under squared Euclidean distance; ties go to
/// the lowest index. Returns (indices, selected codewords).
template <typename T>
std::pair<std::vector<std::uint32_t>, Tensor<T>> quantize(const Tensor<T>& z,
                                                          const Tensor<T>& codebook) {
    validate_codebook(codebook);
    require(z.rank() == 2 && z.dim(1) == codebook.dim(1), "vq: feature dimension mismatch");
    const std::int64_t m = z.dim(0), d = z.dim(1), k = codebook.dim(0);

    // distances via one GEMM: ||z - c||^2 = ||z||^2 - 2 z.c + ||c||^2
    grad::EMat<T> dist(m, k);
    {
        grad::ECMap<T> zm(z.data(), m, d);
        grad::ECMap<T> cm(codebook.data(), k, d);
        dist.noalias() = T(-2) * (zm * cm.transpose());
        Eigen::Array<T, Eigen::Dynamic, 1> zn = zm.rowwise().squaredNorm();
        Eigen::Array<T, Eigen::Dynamic, 1> cn = cm.rowwise().squaredNorm();
        dist.array().colwise() += zn;
        dist.array().rowwise() += cn.transpose();
    }

    std::vector<std::uint32_t> indices(static_cast<std::size_t>(m));
    Tensor<T> zq({m, d});
    for (std::int64_t r = 0; r < m; ++r) {
        std::int64_t best = 0;
        T best_d = dist(r, 0);
        for (std::int64_t c = 1; c < k; ++c)
            if (dist(r, c) < best_d) {
                best_d = dist(r, c);
                best = c;
            }
        indices[static_cast<std::size_t>(r)] = static_cast<std::uint32_t>(best);
        const T* src = codebook.data() + best * d;
        std::copy(src, src + d, zq.data() + r * d);
    }
    return {std::move(indices), std::move(zq)};
}

/// Straight-through bridge: forward value is Zq, backward passes the gradient
/// to Z unchanged.
template <typename T>
grad::NodePtr<T> ste_pass(const grad::NodePtr<T>& z, Tensor<T> zq) {
    return grad::straight_through(z, std::move(zq));
}

/// Monitored quantization loss value: mean over rows of ||z - zq||^2, with the
/// commitment term folded in as (1 + beta).
template <typename T>
T vq_loss_value(const Tensor<T>& z, const Tensor<T>& zq, T beta) {
    require(z.same_shape(zq) && z.rank() == 2, "vq: Z/Zq shape mismatch");
    T acc = T(0);
    for (std::int64_t i = 0; i < z.numel(); ++i) {
        const T diff = z[i] - zq[i];
        acc += diff * diff;
    }
    return acc / static_cast<T>(z.dim(0)) * (T(1) + beta);
}

/// Loss node whose value equals vq_loss_value but whose only gradient path is
/// the commitment term: d/dZ = 2 beta (Z - Zq) / M. The codebook term is a
/// stop-gradient constant (EMA owns codebook motion).
template <typename T>
grad::NodePtr<T> vq_loss_node(const grad::NodePtr<T>& z, const Tensor<T>& zq, T beta) {
    require(z->value.same_shape(zq) && z->value.rank() == 2, "vq: Z/Zq shape mismatch");
    const T m = static_cast<T>(z->value.dim(0));
    T codebook_term = T(0);
    for (std::int64_t i = 0; i < z->value.numel(); ++i) {
        const T diff = z->value[i] - zq[i];
        codebook_term += diff * diff;
    }
    codebook_term /= m;
    auto commit = grad::scale(grad::sum_all(grad::square(grad::sub(z, grad::constant(zq)))),
                              beta / m);
    return grad::add(grad::constant(Tensor<T>::scalar(codebook_term)), commit);
}

/// Codebook-side quantization loss for gradient-based codebook training:
/// mean over rows of ||sg[Z] - C[q]||^2; gradient reaches the codebook only.
template <typename T>
grad::NodePtr<T> codebook_loss_node(const grad::NodePtr<T>& codebook, const Tensor<T>& z,
                                    const std::vector<std::uint32_t>& indices) {
    require(z.rank() == 2, "vq: Z must be [M x d]");
    require(static_cast<std::int64_t>(indices.size()) == z.dim(0), "vq: index count mismatch");
    std::vector<std::int64_t> idx(indices.begin(), indices.end());
    auto selected = grad::gather_rows(codebook, std::move(idx));
    auto diff = grad::sub(selected, grad::constant(z));
    return grad::scale(grad::sum_all(grad::square(diff)), T(1) / static_cast<T>(z.dim(0)));
}

/// Batch usage frequencies of each codeword.
template <typename T>
Tensor<T> usage_histogram(const std::vector<std::uint32_t>& indices, std::int64_t k) {
    require(k >= 1, "vq: histogram needs at least one bin");
    require(!indices.empty(), "vq: histogram of an empty index set");
    Tensor<T> p({k});
    for (auto q : indices) {
        require(q < static_cast<std::uint32_t>(k), "vq: index out of range");
        p[static_cast<std::int64_t>(q)] += T(1);
    }
    const T inv = T(1) / static_cast<T>(indices.size());
    for (std::int64_t i = 0; i < k; ++i) p[i] *= inv;
    return p;
}

/// Negative usage entropy, sum_k p_k log p_k with 0 log 0 = 0 (natural log).
/// Minimized (= -log K) at uniform usage.
template <typename T>
T entropy_loss(const Tensor<T>& hist) {
    require(hist.rank() == 1, "vq: histogram must be a vector");
    T acc = T(0);
    for (std::int64_t i = 0; i < hist.numel(); ++i) {
        const T p = hist[i];
        require(p >= T(0) && p <= T(1) + T(1e-6), "vq: histogram entry outside [0,1]");
        if (p > T(0)) acc += p * std::log(p);
    }
    return acc;
}

/// exp(entropy): effective number of codewords in use.
template <typename T>
T perplexity(const Tensor<T>& hist) {
    return std::exp(-entropy_loss(hist));
}

/// Differentiable surrogate of the usage-entropy loss. Hard assignment
/// frequencies are piecewise constant in Z, so the training graph uses soft
/// assignments p_k = mean_m softmax_k(-||z_m - c_k||^2 / tau) instead; the
/// hard histogram stays the reported diagnostic.
template <typename T>
grad::NodePtr<T> entropy_loss_node(const grad::NodePtr<T>& z, const grad::NodePtr<T>& codebook,
                                   T tau = T(1)) {
    require(tau > T(0), "vq: softmax temperature must be positive");
    auto neg_dist = grad::scale(grad::pairwise_sqdist(z, codebook), T(-1) / tau);
    auto soft = grad::softmax_lastdim(neg_dist);     // [M x K]
    auto usage = grad::mean_axis0(soft);             // [K]
    return grad::sum_all(grad::mul(usage, grad::log_eps(usage)));
}

/// One EMA maintenance step: decay-accumulate cluster sizes and embedding
/// sums, Laplace-smooth the sizes (renormalized, floor epsilon), divide.
/// With decay = 0 this is one Lloyd k-means iteration over the batch.
template <typename T>
void ema_update(EmaState<T>& state, Tensor<T>& codebook, const Tensor<T>& z,
                const std::vector<std::uint32_t>& indices, T epsilon = T(1e-5)) {
    require(codebook.rank() == 2, "ema: codebook must be [K x d]");
    const std::int64_t k = codebook.dim(0), d = codebook.dim(1);
    require(state.cluster_size.numel() == k && state.embed_sum.dim(0) == k &&
                state.embed_sum.dim(1) == d,
            "ema: state shape mismatch");
    require(z.rank() == 2 && z.dim(1) == d, "ema: Z feature dimension mismatch");
    require(static_cast<std::int64_t>(indices.size()) == z.dim(0), "ema: index count mismatch");
    require(state.decay >= T(0) && state.decay < T(1), "ema: decay outside [0,1)");

    Tensor<T> counts({k});
    Tensor<T> sums({k, d});
    for (std::int64_t r = 0; r < z.dim(0); ++r) {
        const auto q = static_cast<std::int64_t>(indices[static_cast<std::size_t>(r)]);
        require(q < k, "ema: index out of range");
        counts[q] += T(1);
        for (std::int64_t j = 0; j < d; ++j) sums[q * d + j] += z[r * d + j];
    }

    const T rho = state.decay;
    for (std::int64_t i = 0; i < k; ++i)
        state.cluster_size[i] = rho * state.cluster_size[i] + (T(1) - rho) * counts[i];
    for (std::int64_t i = 0; i < k * d; ++i)
        state.embed_sum[i] = rho * state.embed_sum[i] + (T(1) - rho) * sums[i];

    T total = T(0);
    for (std::int64_t i = 0; i < k; ++i) total += state.cluster_size[i];
    require(total > T(0), "ema: vanished total cluster mass");
    const T norm = total / (total + static_cast<T>(k) * epsilon);
    for (std::int64_t i = 0; i < k; ++i) {
        const T smoothed = (state.cluster_size[i] + epsilon) * norm;
        for (std::int64_t j = 0; j < d; ++j)
            codebook[i * d + j] = state.embed_sum[i * d + j] / smoothed;
    }
}

/// k-means++ seeding from sample rows; deterministic given the stream. When
/// the samples cannot supply K distinct codewords, the remainder are jittered
/// copies of already-chosen ones.
template <typename T>
Tensor<T> init_codebook(const Tensor<T>& samples, std::int64_t k, Rng& rng) {
    require(samples.rank() == 2, "vq: samples must be [n x d]");
    require(k >= 2 && std::has_single_bit(static_cast<std::uint64_t>(k)),
            "vq: codebook size must be a power of two >= 2");
    const std::int64_t n = samples.dim(0), d = samples.dim(1);
    require(n >= 1, "vq: need at least one sample");

    Tensor<T> cb({k, d});
    std::vector<double> min_d2(static_cast<std::size_t>(n),
                               std::numeric_limits<double>::infinity());
    auto copy_row = [&](std::int64_t dst, std::int64_t src) {
        for (std::int64_t j = 0; j < d; ++j) cb[dst * d + j] = samples[src * d + j];
    };
    auto absorb = [&](std::int64_t chosen) {
        for (std::int64_t r = 0; r < n; ++r) {
            double acc = 0;
            for (std::int64_t j = 0; j < d; ++j) {
                const double diff = static_cast<double>(samples[r * d + j]) -
                                    static_cast<double>(samples[chosen * d + j]);
                acc += diff * diff;
            }
            min_d2[static_cast<std::size_t>(r)] =
                std::min(min_d2[static_cast<std::size_t>(r)], acc);
        }
    };

    std::int64_t first = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    copy_row(0, first);
    absorb(first);
    for (std::int64_t i = 1; i < k; ++i) {
        double total = 0;
        for (double v : min_d2) total += v;
        if (total <= 0) {
            // no distinct mass left: jitter a copy of an already-chosen codeword
            const std::int64_t src = static_cast<std::int64_t>(
                rng.uniform_index(static_cast<std::uint64_t>(i)));
            for (std::int64_t j = 0; j < d; ++j)
                cb[i * d + j] = cb[src * d + j] + static_cast<T>(rng.normal() * 1e-3);
            continue;
        }
        double target = rng.uniform() * total;
        std::int64_t chosen = n - 1;
        double run = 0;
        for (std::int64_t r = 0; r < n; ++r) {
            run += min_d2[static_cast<std::size_t>(r)];
            if (run >= target) {
                chosen = r;
                break;
            }
        }
        copy_row(i, chosen);
        absorb(chosen);
    }
    return cb;
}

}  // namespace vqcsi::vq

#endif  // VQCSI_VQ_VQ_HPP
