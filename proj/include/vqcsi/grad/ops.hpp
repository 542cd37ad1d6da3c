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
// Reverse-mode operator set. Each op builds one graph node whose backprop
// closure implements the exact adjoint of its forward map; the matrix
// kernels are delegated to Eigen maps over the tensor buffers.

#ifndef VQCSI_GRAD_OPS_HPP
#define VQCSI_GRAD_OPS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vqcsi/grad/graph.hpp"

namespace vqcsi::grad {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

namespace detail {

template <typename T, typename... Parents>
NodePtr<T> make_node(Tensor<T> value, std::vector<NodePtr<T>> parents) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) n->requires_grad |= p->requires_grad;
    return n;
}

template <typename T>
ECMap<T> as_mat(const Tensor<T>& t, std::int64_t rows, std::int64_t cols) {
    return ECMap<T>(t.data(), rows, cols);
}

template <typename T>
EMap<T> as_mat(Tensor<T>& t, std::int64_t rows, std::int64_t cols) {
    return EMap<T>(t.data(), rows, cols);
}

// rows = everything but the last axis
template <typename T>
std::int64_t leading_rows(const Tensor<T>& t) {
    require(t.rank() >= 1, "op: tensor rank must be >= 1");
    return t.numel() / t.shape().back();
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

template <typename T>
NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b) {
    require(a->value.same_shape(b->value), "add: shape mismatch");
    Tensor<T> out = a->value;
    const T* pb = b->value.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) po[i] += pb[i];
    auto n = detail::make_node<T>(std::move(out), {a, b});
    n->backprop = [](Node<T>& self) {
        if (self.parents[0]->requires_grad) accumulate_grad(*self.parents[0], self.grad);
        if (self.parents[1]->requires_grad) accumulate_grad(*self.parents[1], self.grad);
    };
    return n;
}

template <typename T>
NodePtr<T> scale(const NodePtr<T>& x, T c) {
    Tensor<T> out = x->value;
    T* po = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) po[i] *= c;
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [c](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> g = self.grad;
        T* pg = g.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) pg[i] *= c;
        accumulate_grad(*self.parents[0], g);
    };
    return n;
}

template <typename T>
NodePtr<T> sub(const NodePtr<T>& a, const NodePtr<T>& b) {
    return add(a, scale(b, T(-1)));
}

template <typename T>
NodePtr<T> mul(const NodePtr<T>& a, const NodePtr<T>& b) {
    require(a->value.same_shape(b->value), "mul: shape mismatch");
    Tensor<T> out = a->value;
    const T* pb = b->value.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) po[i] *= pb[i];
    auto n = detail::make_node<T>(std::move(out), {a, b});
    n->backprop = [](Node<T>& self) {
        const Tensor<T>& av = self.parents[0]->value;
        const Tensor<T>& bv = self.parents[1]->value;
        for (int side = 0; side < 2; ++side) {
            Node<T>& dst = *self.parents[side];
            if (!dst.requires_grad) continue;
            const Tensor<T>& other = side == 0 ? bv : av;
            Tensor<T> g = self.grad;
            T* pg = g.data();
            const T* po = other.data();
            for (std::int64_t i = 0; i < g.numel(); ++i) pg[i] *= po[i];
            accumulate_grad(dst, g);
        }
    };
    return n;
}

template <typename T>
NodePtr<T> relu(const NodePtr<T>& x) {
    Tensor<T> out = x->value;
    T* po = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) po[i] = po[i] > T(0) ? po[i] : T(0);
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        const Tensor<T>& xv = self.parents[0]->value;
        Tensor<T> g = self.grad;
        T* pg = g.data();
        const T* px = xv.data();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (px[i] <= T(0)) pg[i] = T(0);
        accumulate_grad(*self.parents[0], g);
    };
    return n;
}

template <typename T>
NodePtr<T> sigmoid(const NodePtr<T>& x) {
    Tensor<T> out = x->value;
    T* po = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        T v = po[i];
        if (v >= T(0)) {
            po[i] = T(1) / (T(1) + std::exp(-v));
        } else {
            T e = std::exp(v);
            po[i] = e / (T(1) + e);
        }
    }
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> g = self.grad;
        T* pg = g.data();
        const T* py = self.value.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) pg[i] *= py[i] * (T(1) - py[i]);
        accumulate_grad(*self.parents[0], g);
    };
    return n;
}

/// Natural log with an additive floor: log(x + eps).
template <typename T>
NodePtr<T> log_eps(const NodePtr<T>& x, T eps = T(1e-12)) {
    Tensor<T> out = x->value;
    T* po = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) po[i] = std::log(po[i] + eps);
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [eps](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        const Tensor<T>& xv = self.parents[0]->value;
        Tensor<T> g = self.grad;
        T* pg = g.data();
        const T* px = xv.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) pg[i] /= (px[i] + eps);
        accumulate_grad(*self.parents[0], g);
    };
    return n;
}

// ------------------------------------------------------------ bias broadcasts

/// x[..., d] + b[d]
template <typename T>
NodePtr<T> add_bias_lastdim(const NodePtr<T>& x, const NodePtr<T>& b) {
    const std::int64_t d = x->value.shape().back();
    require(b->value.rank() == 1 && b->value.dim(0) == d, "add_bias_lastdim: bias shape mismatch");
    const std::int64_t rows = detail::leading_rows(x->value);
    Tensor<T> out = x->value;
    const T* pb = b->value.data();
    T* po = out.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < d; ++j) po[r * d + j] += pb[j];
    auto n = detail::make_node<T>(std::move(out), {x, b});
    n->backprop = [rows, d](Node<T>& self) {
        if (self.parents[0]->requires_grad) accumulate_grad(*self.parents[0], self.grad);
        if (self.parents[1]->requires_grad) {
            Tensor<T> gb({d});
            const T* pg = self.grad.data();
            T* pgb = gb.data();
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < d; ++j) pgb[j] += pg[r * d + j];
            accumulate_grad(*self.parents[1], gb);
        }
    };
    return n;
}

/// x[B, C, H, W] + b[C] broadcast over batch and spatial dims
template <typename T>
NodePtr<T> add_bias_channels(const NodePtr<T>& x, const NodePtr<T>& b) {
    require(x->value.rank() == 4, "add_bias_channels: expected NCHW input");
    const std::int64_t B = x->value.dim(0), C = x->value.dim(1);
    const std::int64_t HW = x->value.dim(2) * x->value.dim(3);
    require(b->value.rank() == 1 && b->value.dim(0) == C, "add_bias_channels: bias shape mismatch");
    Tensor<T> out = x->value;
    const T* pb = b->value.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < B; ++i)
        for (std::int64_t c = 0; c < C; ++c) {
            T bc = pb[c];
            T* row = po + (i * C + c) * HW;
            for (std::int64_t k = 0; k < HW; ++k) row[k] += bc;
        }
    auto n = detail::make_node<T>(std::move(out), {x, b});
    n->backprop = [B, C, HW](Node<T>& self) {
        if (self.parents[0]->requires_grad) accumulate_grad(*self.parents[0], self.grad);
        if (self.parents[1]->requires_grad) {
            Tensor<T> gb({C});
            const T* pg = self.grad.data();
            T* pgb = gb.data();
            for (std::int64_t i = 0; i < B; ++i)
                for (std::int64_t c = 0; c < C; ++c) {
                    const T* row = pg + (i * C + c) * HW;
                    T acc = T(0);
                    for (std::int64_t k = 0; k < HW; ++k) acc += row[k];
                    pgb[c] += acc;
                }
            accumulate_grad(*self.parents[1], gb);
        }
    };
    return n;
}

/// x[B, C, H, W] * s[B, C] broadcast over spatial dims (channel gating)
template <typename T>
NodePtr<T> mul_channels(const NodePtr<T>& x, const NodePtr<T>& s) {
    require(x->value.rank() == 4, "mul_channels: expected NCHW input");
    const std::int64_t B = x->value.dim(0), C = x->value.dim(1);
    const std::int64_t HW = x->value.dim(2) * x->value.dim(3);
    require(s->value.rank() == 2 && s->value.dim(0) == B && s->value.dim(1) == C,
            "mul_channels: gate shape mismatch");
    Tensor<T> out = x->value;
    const T* ps = s->value.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < B; ++i)
        for (std::int64_t c = 0; c < C; ++c) {
            T sc = ps[i * C + c];
            T* row = po + (i * C + c) * HW;
            for (std::int64_t k = 0; k < HW; ++k) row[k] *= sc;
        }
    auto n = detail::make_node<T>(std::move(out), {x, s});
    n->backprop = [B, C, HW](Node<T>& self) {
        const Tensor<T>& xv = self.parents[0]->value;
        const Tensor<T>& sv = self.parents[1]->value;
        const T* pg = self.grad.data();
        if (self.parents[0]->requires_grad) {
            Tensor<T> gx = self.grad;
            T* pgx = gx.data();
            const T* ps = sv.data();
            for (std::int64_t i = 0; i < B; ++i)
                for (std::int64_t c = 0; c < C; ++c) {
                    T sc = ps[i * C + c];
                    T* row = pgx + (i * C + c) * HW;
                    for (std::int64_t k = 0; k < HW; ++k) row[k] *= sc;
                }
            accumulate_grad(*self.parents[0], gx);
        }
        if (self.parents[1]->requires_grad) {
            Tensor<T> gs({B, C});
            T* pgs = gs.data();
            const T* px = xv.data();
            for (std::int64_t i = 0; i < B; ++i)
                for (std::int64_t c = 0; c < C; ++c) {
                    const std::int64_t off = (i * C + c) * HW;
                    T acc = T(0);
                    for (std::int64_t k = 0; k < HW; ++k) acc += pg[off + k] * px[off + k];
                    pgs[i * C + c] = acc;
                }
            accumulate_grad(*self.parents[1], gs);
        }
    };
    return n;
}

// ------------------------------------------------------------- matrix algebra

template <typename T>
NodePtr<T> matmul(const NodePtr<T>& a, const NodePtr<T>& b) {
    require(a->value.rank() == 2 && b->value.rank() == 2, "matmul: rank-2 operands required");
    const std::int64_t M = a->value.dim(0), K = a->value.dim(1), N = b->value.dim(1);
    require(b->value.dim(0) == K, "matmul: inner dimension mismatch");
    Tensor<T> out({M, N});
    detail::as_mat(out, M, N).noalias() =
        detail::as_mat(a->value, M, K) * detail::as_mat(b->value, K, N);
    auto n = detail::make_node<T>(std::move(out), {a, b});
    n->backprop = [M, K, N](Node<T>& self) {
        auto g = detail::as_mat(self.grad, M, N);
        if (self.parents[0]->requires_grad) {
            Tensor<T> ga({M, K});
            detail::as_mat(ga, M, K).noalias() =
                g * detail::as_mat(self.parents[1]->value, K, N).transpose();
            accumulate_grad(*self.parents[0], ga);
        }
        if (self.parents[1]->requires_grad) {
            Tensor<T> gb({K, N});
            detail::as_mat(gb, K, N).noalias() =
                detail::as_mat(self.parents[0]->value, M, K).transpose() * g;
            accumulate_grad(*self.parents[1], gb);
        }
    };
    return n;
}

/// Batched matmul: [B, M, K] x [B, K, N] -> [B, M, N]
template <typename T>
NodePtr<T> bmm(const NodePtr<T>& a, const NodePtr<T>& b) {
    require(a->value.rank() == 3 && b->value.rank() == 3, "bmm: rank-3 operands required");
    const std::int64_t Bn = a->value.dim(0), M = a->value.dim(1), K = a->value.dim(2);
    const std::int64_t N = b->value.dim(2);
    require(b->value.dim(0) == Bn && b->value.dim(1) == K, "bmm: batch/inner dimension mismatch");
    Tensor<T> out({Bn, M, N});
    for (std::int64_t i = 0; i < Bn; ++i) {
        EMap<T>(out.data() + i * M * N, M, N).noalias() =
            ECMap<T>(a->value.data() + i * M * K, M, K) *
            ECMap<T>(b->value.data() + i * K * N, K, N);
    }
    auto n = detail::make_node<T>(std::move(out), {a, b});
    n->backprop = [Bn, M, K, N](Node<T>& self) {
        if (self.parents[0]->requires_grad) {
            Tensor<T> ga({Bn, M, K});
            for (std::int64_t i = 0; i < Bn; ++i)
                EMap<T>(ga.data() + i * M * K, M, K).noalias() =
                    ECMap<T>(self.grad.data() + i * M * N, M, N) *
                    ECMap<T>(self.parents[1]->value.data() + i * K * N, K, N).transpose();
            accumulate_grad(*self.parents[0], ga);
        }
        if (self.parents[1]->requires_grad) {
            Tensor<T> gb({Bn, K, N});
            for (std::int64_t i = 0; i < Bn; ++i)
                EMap<T>(gb.data() + i * K * N, K, N).noalias() =
                    ECMap<T>(self.parents[0]->value.data() + i * M * K, M, K).transpose() *
                    ECMap<T>(self.grad.data() + i * M * N, M, N);
            accumulate_grad(*self.parents[1], gb);
        }
    };
    return n;
}

/// Swap the last two axes of a rank-2 or rank-3 tensor.
template <typename T>
NodePtr<T> transpose_last2(const NodePtr<T>& x) {
    const auto& sh = x->value.shape();
    require(sh.size() == 2 || sh.size() == 3, "transpose_last2: rank-2/3 required");
    const std::int64_t Bn = sh.size() == 3 ? sh[0] : 1;
    const std::int64_t M = sh[sh.size() - 2], N = sh.back();
    std::vector<std::int64_t> osh = sh;
    std::swap(osh[osh.size() - 2], osh.back());
    Tensor<T> out(osh);
    for (std::int64_t i = 0; i < Bn; ++i)
        EMap<T>(out.data() + i * M * N, N, M).noalias() =
            ECMap<T>(x->value.data() + i * M * N, M, N).transpose();
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [Bn, M, N](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> gx(self.parents[0]->value.shape());
        for (std::int64_t i = 0; i < Bn; ++i)
            EMap<T>(gx.data() + i * M * N, M, N).noalias() =
                ECMap<T>(self.grad.data() + i * M * N, N, M).transpose();
        accumulate_grad(*self.parents[0], gx);
    };
    return n;
}

// --------------------------------------------------------------- shape moves

template <typename T>
NodePtr<T> reshape(const NodePtr<T>& x, std::vector<std::int64_t> shape) {
    Tensor<T> out = x->value.reshaped(std::move(shape));
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        accumulate_grad(*self.parents[0], self.grad.reshaped(self.parents[0]->value.shape()));
    };
    return n;
}

namespace detail {

// byte-level geometry for concat/slice along `axis`
struct AxisSpan {
    std::int64_t outer, inner;  // product of dims before / after the axis
};

template <typename T>
AxisSpan axis_span(const Tensor<T>& t, std::size_t axis) {
    require(axis < t.rank(), "axis out of range");
    AxisSpan s{1, 1};
    for (std::size_t i = 0; i < axis; ++i) s.outer *= t.dim(i);
    for (std::size_t i = axis + 1; i < t.rank(); ++i) s.inner *= t.dim(i);
    return s;
}

}  // namespace detail

template <typename T>
NodePtr<T> concat(const std::vector<NodePtr<T>>& xs, std::size_t axis) {
    require(!xs.empty(), "concat: empty input list");
    auto base = xs[0]->value.shape();
    require(axis < base.size(), "concat: axis out of range");
    std::int64_t total = 0;
    for (const auto& x : xs) {
        auto sh = x->value.shape();
        require(sh.size() == base.size(), "concat: rank mismatch");
        for (std::size_t i = 0; i < sh.size(); ++i)
            if (i != axis) require(sh[i] == base[i], "concat: off-axis dimension mismatch");
        total += sh[axis];
    }
    auto osh = base;
    osh[axis] = total;
    Tensor<T> out(osh);
    const auto span = detail::axis_span(out, axis);
    T* po = out.data();
    std::int64_t offset = 0;
    for (const auto& x : xs) {
        const std::int64_t len = x->value.dim(axis);
        const T* px = x->value.data();
        for (std::int64_t o = 0; o < span.outer; ++o)
            std::copy(px + o * len * span.inner, px + (o + 1) * len * span.inner,
                      po + (o * total + offset) * span.inner);
        offset += len;
    }
    auto n = detail::make_node<T>(std::move(out), std::vector<NodePtr<T>>(xs));
    n->backprop = [axis, span, total](Node<T>& self) {
        const T* pg = self.grad.data();
        std::int64_t offset = 0;
        for (const auto& parent : self.parents) {
            const std::int64_t len = parent->value.dim(axis);
            if (parent->requires_grad) {
                Tensor<T> gp(parent->value.shape());
                T* pp = gp.data();
                for (std::int64_t o = 0; o < span.outer; ++o)
                    std::copy(pg + (o * total + offset) * span.inner,
                              pg + (o * total + offset + len) * span.inner,
                              pp + o * len * span.inner);
                accumulate_grad(*parent, gp);
            }
            offset += len;
        }
    };
    return n;
}

template <typename T>
NodePtr<T> slice(const NodePtr<T>& x, std::size_t axis, std::int64_t start, std::int64_t len) {
    const auto& sh = x->value.shape();
    require(axis < sh.size(), "slice: axis out of range");
    require(start >= 0 && len >= 0 && start + len <= sh[axis], "slice: range out of bounds");
    auto osh = sh;
    osh[axis] = len;
    Tensor<T> out(osh);
    const auto span = detail::axis_span(x->value, axis);
    const std::int64_t full = sh[axis];
    const T* px = x->value.data();
    T* po = out.data();
    for (std::int64_t o = 0; o < span.outer; ++o)
        std::copy(px + (o * full + start) * span.inner, px + (o * full + start + len) * span.inner,
                  po + o * len * span.inner);
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [axis, span, full, start, len](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> gx(self.parents[0]->value.shape());
        const T* pg = self.grad.data();
        T* px = gx.data();
        for (std::int64_t o = 0; o < span.outer; ++o)
            std::copy(pg + o * len * span.inner, pg + (o + 1) * len * span.inner,
                      px + (o * full + start) * span.inner);
        accumulate_grad(*self.parents[0], gx);
    };
    return n;
}

/// [B, C, H, W] -> [B, H*W, C]: feature map to token sequence.
template <typename T>
NodePtr<T> bchw_to_tokens(const NodePtr<T>& x) {
    require(x->value.rank() == 4, "bchw_to_tokens: expected NCHW input");
    const std::int64_t B = x->value.dim(0), C = x->value.dim(1);
    const std::int64_t HW = x->value.dim(2) * x->value.dim(3);
    Tensor<T> out({B, HW, C});
    const T* px = x->value.data();
    T* po = out.data();
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t k = 0; k < HW; ++k)
                po[(b * HW + k) * C + c] = px[(b * C + c) * HW + k];
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [B, C, HW](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> gx(self.parents[0]->value.shape());
        const T* pg = self.grad.data();
        T* px = gx.data();
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t c = 0; c < C; ++c)
                for (std::int64_t k = 0; k < HW; ++k)
                    px[(b * C + c) * HW + k] = pg[(b * HW + k) * C + c];
        accumulate_grad(*self.parents[0], gx);
    };
    return n;
}

/// [B, H*W, C] -> [B, C, H, W]: token sequence back to a feature map.
template <typename T>
NodePtr<T> tokens_to_bchw(const NodePtr<T>& x, std::int64_t H, std::int64_t W) {
    require(x->value.rank() == 3, "tokens_to_bchw: expected [B, L, C] input");
    const std::int64_t B = x->value.dim(0), L = x->value.dim(1), C = x->value.dim(2);
    require(L == H * W, "tokens_to_bchw: token count does not match H*W");
    Tensor<T> out({B, C, H, W});
    const T* px = x->value.data();
    T* po = out.data();
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t k = 0; k < L; ++k)
            for (std::int64_t c = 0; c < C; ++c)
                po[(b * C + c) * L + k] = px[(b * L + k) * C + c];
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [B, L, C](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> gx(self.parents[0]->value.shape());
        const T* pg = self.grad.data();
        T* px = gx.data();
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t k = 0; k < L; ++k)
                for (std::int64_t c = 0; c < C; ++c)
                    px[(b * L + k) * C + c] = pg[(b * C + c) * L + k];
        accumulate_grad(*self.parents[0], gx);
    };
    return n;
}

/// x + p with p broadcast over the leading axis: p's shape must equal
/// x's shape with the first dimension dropped.
template <typename T>
NodePtr<T> add_broadcast0(const NodePtr<T>& x, const NodePtr<T>& p) {
    require(x->value.rank() == p->value.rank() + 1, "add_broadcast0: rank mismatch");
    for (std::size_t i = 0; i < p->value.rank(); ++i) {
        const auto ax = static_cast<std::int64_t>(i);
        require(x->value.dim(ax + 1) == p->value.dim(ax), "add_broadcast0: shape mismatch");
    }
    const std::int64_t B = x->value.dim(0), inner = p->value.numel();
    Tensor<T> out(x->value.shape());
    const T* px = x->value.data();
    const T* pp = p->value.data();
    T* po = out.data();
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t i = 0; i < inner; ++i) po[b * inner + i] = px[b * inner + i] + pp[i];
    auto n = detail::make_node<T>(std::move(out), {x, p});
    n->backprop = [B, inner](Node<T>& self) {
        if (self.parents[0]->requires_grad) accumulate_grad(*self.parents[0], self.grad);
        if (self.parents[1]->requires_grad) {
            Tensor<T> gp(self.parents[1]->value.shape());
            const T* pg = self.grad.data();
            T* pd = gp.data();
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t i = 0; i < inner; ++i) pd[i] += pg[b * inner + i];
            accumulate_grad(*self.parents[1], gp);
        }
    };
    return n;
}

// ---------------------------------------------------------------- reductions

template <typename T>
NodePtr<T> sum_all(const NodePtr<T>& x) {
    T acc = T(0);
    const T* px = x->value.data();
    for (std::int64_t i = 0; i < x->value.numel(); ++i) acc += px[i];
    auto n = detail::make_node<T>(Tensor<T>::scalar(acc), {x});
    n->backprop = [](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> gx(self.parents[0]->value.shape());
        gx.fill(self.grad[0]);
        accumulate_grad(*self.parents[0], gx);
    };
    return n;
}

template <typename T>
NodePtr<T> mean_all(const NodePtr<T>& x) {
    return scale(sum_all(x), T(1) / static_cast<T>(x->value.numel()));
}

/// Column means of a rank-2 tensor: [M, K] -> [K].
template <typename T>
NodePtr<T> mean_axis0(const NodePtr<T>& x) {
    require(x->value.rank() == 2, "mean_axis0: rank-2 required");
    const std::int64_t M = x->value.dim(0), K = x->value.dim(1);
    Tensor<T> out({K});
    const T* px = x->value.data();
    T* po = out.data();
    for (std::int64_t m = 0; m < M; ++m)
        for (std::int64_t k = 0; k < K; ++k) po[k] += px[m * K + k];
    const T inv = T(1) / static_cast<T>(M);
    for (std::int64_t k = 0; k < K; ++k) po[k] *= inv;
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [M, K, inv](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> gx({M, K});
        const T* pg = self.grad.data();
        T* px = gx.data();
        for (std::int64_t m = 0; m < M; ++m)
            for (std::int64_t k = 0; k < K; ++k) px[m * K + k] = pg[k] * inv;
        accumulate_grad(*self.parents[0], gx);
    };
    return n;
}

/// [B, C, H, W] -> [B, C] spatial mean.
template <typename T>
NodePtr<T> global_mean_pool(const NodePtr<T>& x) {
    require(x->value.rank() == 4, "global_mean_pool: expected NCHW input");
    const std::int64_t B = x->value.dim(0), C = x->value.dim(1);
    const std::int64_t HW = x->value.dim(2) * x->value.dim(3);
    Tensor<T> out({B, C});
    const T* px = x->value.data();
    T* po = out.data();
    const T inv = T(1) / static_cast<T>(HW);
    for (std::int64_t i = 0; i < B * C; ++i) {
        T acc = T(0);
        for (std::int64_t k = 0; k < HW; ++k) acc += px[i * HW + k];
        po[i] = acc * inv;
    }
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [B, C, HW, inv](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> gx(self.parents[0]->value.shape());
        const T* pg = self.grad.data();
        T* px = gx.data();
        for (std::int64_t i = 0; i < B * C; ++i) {
            T g = pg[i] * inv;
            for (std::int64_t k = 0; k < HW; ++k) px[i * HW + k] = g;
        }
        accumulate_grad(*self.parents[0], gx);
    };
    return n;
}

// ------------------------------------------------------------- normalization

/// Row-wise softmax over the last axis (any rank).
template <typename T>
NodePtr<T> softmax_lastdim(const NodePtr<T>& x) {
    const std::int64_t d = x->value.shape().back();
    const std::int64_t rows = detail::leading_rows(x->value);
    Tensor<T> out = x->value;
    T* po = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        T* row = po + r * d;
        T mx = row[0];
        for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (std::int64_t j = 0; j < d; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const T inv = T(1) / sum;
        for (std::int64_t j = 0; j < d; ++j) row[j] *= inv;
    }
    auto n = detail::make_node<T>(std::move(out), {x});
    n->backprop = [rows, d](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> gx(self.parents[0]->value.shape());
        const T* py = self.value.data();
        const T* pg = self.grad.data();
        T* px = gx.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* y = py + r * d;
            const T* g = pg + r * d;
            T dot = T(0);
            for (std::int64_t j = 0; j < d; ++j) dot += y[j] * g[j];
            T* o = px + r * d;
            for (std::int64_t j = 0; j < d; ++j) o[j] = y[j] * (g[j] - dot);
        }
        accumulate_grad(*self.parents[0], gx);
    };
    return n;
}

/// LayerNorm over the last axis with learned gain and bias.
template <typename T>
NodePtr<T> layernorm(const NodePtr<T>& x, const NodePtr<T>& gain, const NodePtr<T>& bias,
                     T eps = T(1e-5)) {
    const std::int64_t d = x->value.shape().back();
    require(gain->value.rank() == 1 && gain->value.dim(0) == d, "layernorm: gain shape mismatch");
    require(bias->value.rank() == 1 && bias->value.dim(0) == d, "layernorm: bias shape mismatch");
    const std::int64_t rows = detail::leading_rows(x->value);
    Tensor<T> out(x->value.shape());
    Tensor<T> xhat(x->value.shape());   // cached for backward
    Tensor<T> inv_std({rows});
    const T* px = x->value.data();
    const T* pgain = gain->value.data();
    const T* pbias = bias->value.data();
    T* po = out.data();
    T* ph = xhat.data();
    T* pis = inv_std.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* row = px + r * d;
        T mean = T(0);
        for (std::int64_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<T>(d);
        T var = T(0);
        for (std::int64_t j = 0; j < d; ++j) {
            T c = row[j] - mean;
            var += c * c;
        }
        var /= static_cast<T>(d);
        const T is = T(1) / std::sqrt(var + eps);
        pis[r] = is;
        for (std::int64_t j = 0; j < d; ++j) {
            T h = (row[j] - mean) * is;
            ph[r * d + j] = h;
            po[r * d + j] = pgain[j] * h + pbias[j];
        }
    }
    auto n = detail::make_node<T>(std::move(out), {x, gain, bias});
    n->backprop = [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        const T* pg = self.grad.data();
        const T* ph = xhat.data();
        const T* pis = inv_std.data();
        const T* pgain = self.parents[1]->value.data();
        if (self.parents[0]->requires_grad) {
            Tensor<T> gx(self.parents[0]->value.shape());
            T* px = gx.data();
            for (std::int64_t r = 0; r < rows; ++r) {
                // dxhat = g * gain; dx = is * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
                T m1 = T(0), m2 = T(0);
                for (std::int64_t j = 0; j < d; ++j) {
                    T dh = pg[r * d + j] * pgain[j];
                    m1 += dh;
                    m2 += dh * ph[r * d + j];
                }
                m1 /= static_cast<T>(d);
                m2 /= static_cast<T>(d);
                for (std::int64_t j = 0; j < d; ++j) {
                    T dh = pg[r * d + j] * pgain[j];
                    px[r * d + j] = pis[r] * (dh - m1 - ph[r * d + j] * m2);
                }
            }
            accumulate_grad(*self.parents[0], gx);
        }
        if (self.parents[1]->requires_grad) {
            Tensor<T> gg({d});
            T* p = gg.data();
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < d; ++j) p[j] += pg[r * d + j] * ph[r * d + j];
            accumulate_grad(*self.parents[1], gg);
        }
        if (self.parents[2]->requires_grad) {
            Tensor<T> gb({d});
            T* p = gb.data();
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t j = 0; j < d; ++j) p[j] += pg[r * d + j];
            accumulate_grad(*self.parents[2], gb);
        }
    };
    return n;
}

/// Per-channel batch normalization over NCHW input.
///
/// Training mode normalizes with batch statistics and updates the running
/// buffers in place (they live outside the graph); eval mode is the frozen
/// affine map through the running statistics.
template <typename T>
NodePtr<T> batchnorm2d(const NodePtr<T>& x, const NodePtr<T>& gain, const NodePtr<T>& bias,
                       Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                       T momentum = T(0.1), T eps = T(1e-5)) {
    require(x->value.rank() == 4, "batchnorm2d: expected NCHW input");
    const std::int64_t B = x->value.dim(0), C = x->value.dim(1);
    const std::int64_t HW = x->value.dim(2) * x->value.dim(3);
    require(gain->value.numel() == C && bias->value.numel() == C,
            "batchnorm2d: affine parameter shape mismatch");
    require(running_mean.numel() == C && running_var.numel() == C,
            "batchnorm2d: running stats shape mismatch");
    const std::int64_t count = B * HW;

    Tensor<T> mean({C}), inv_std({C});
    if (training) {
        const T* px = x->value.data();
        for (std::int64_t c = 0; c < C; ++c) {
            T acc = T(0);
            for (std::int64_t b = 0; b < B; ++b) {
                const T* row = px + (b * C + c) * HW;
                for (std::int64_t k = 0; k < HW; ++k) acc += row[k];
            }
            mean[c] = acc / static_cast<T>(count);
        }
        for (std::int64_t c = 0; c < C; ++c) {
            T acc = T(0);
            for (std::int64_t b = 0; b < B; ++b) {
                const T* row = px + (b * C + c) * HW;
                for (std::int64_t k = 0; k < HW; ++k) {
                    T d = row[k] - mean[c];
                    acc += d * d;
                }
            }
            T var = acc / static_cast<T>(count);
            inv_std[c] = T(1) / std::sqrt(var + eps);
            running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean[c];
            running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var;
        }
    } else {
        for (std::int64_t c = 0; c < C; ++c) {
            mean[c] = running_mean[c];
            inv_std[c] = T(1) / std::sqrt(running_var[c] + eps);
        }
    }

    Tensor<T> out(x->value.shape());
    Tensor<T> xhat(x->value.shape());
    {
        const T* px = x->value.data();
        const T* pgain = gain->value.data();
        const T* pbias = bias->value.data();
        T* po = out.data();
        T* ph = xhat.data();
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t c = 0; c < C; ++c) {
                const std::int64_t off = (b * C + c) * HW;
                for (std::int64_t k = 0; k < HW; ++k) {
                    T h = (px[off + k] - mean[c]) * inv_std[c];
                    ph[off + k] = h;
                    po[off + k] = pgain[c] * h + pbias[c];
                }
            }
    }

    auto n = detail::make_node<T>(std::move(out), {x, gain, bias});
    n->backprop = [B, C, HW, count, training, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)](Node<T>& self) {
        const T* pg = self.grad.data();
        const T* ph = xhat.data();
        const T* pgain = self.parents[1]->value.data();
        // per-channel sums of g and g*xhat serve both the affine grads and the
        // training-mode data gradient
        std::vector<T> sum_g(static_cast<std::size_t>(C), T(0));
        std::vector<T> sum_gh(static_cast<std::size_t>(C), T(0));
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t c = 0; c < C; ++c) {
                const std::int64_t off = (b * C + c) * HW;
                T a = T(0), d = T(0);
                for (std::int64_t k = 0; k < HW; ++k) {
                    a += pg[off + k];
                    d += pg[off + k] * ph[off + k];
                }
                sum_g[static_cast<std::size_t>(c)] += a;
                sum_gh[static_cast<std::size_t>(c)] += d;
            }
        if (self.parents[0]->requires_grad) {
            Tensor<T> gx(self.parents[0]->value.shape());
            T* px = gx.data();
            const T invn = T(1) / static_cast<T>(count);
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t c = 0; c < C; ++c) {
                    const std::int64_t off = (b * C + c) * HW;
                    const T m1 = sum_g[static_cast<std::size_t>(c)] * invn;
                    const T m2 = sum_gh[static_cast<std::size_t>(c)] * invn;
                    for (std::int64_t k = 0; k < HW; ++k) {
                        T dh = pg[off + k] * pgain[c];
                        if (training) {
                            px[off + k] =
                                inv_std[c] * (dh - pgain[c] * m1 - ph[off + k] * pgain[c] * m2);
                        } else {
                            px[off + k] = inv_std[c] * dh;
                        }
                    }
                }
            accumulate_grad(*self.parents[0], gx);
        }
        if (self.parents[1]->requires_grad) {
            Tensor<T> gg({C});
            for (std::int64_t c = 0; c < C; ++c) gg[c] = sum_gh[static_cast<std::size_t>(c)];
            accumulate_grad(*self.parents[1], gg);
        }
        if (self.parents[2]->requires_grad) {
            Tensor<T> gb({C});
            for (std::int64_t c = 0; c < C; ++c) gb[c] = sum_g[static_cast<std::size_t>(c)];
            accumulate_grad(*self.parents[2], gb);
        }
    };
    return n;
}

// ------------------------------------------------------- quantization bridge

/// Pairwise squared distances: D[m, k] = ||z_m - c_k||^2.
template <typename T>
NodePtr<T> pairwise_sqdist(const NodePtr<T>& z, const NodePtr<T>& c) {
    require(z->value.rank() == 2 && c->value.rank() == 2, "pairwise_sqdist: rank-2 required");
    const std::int64_t M = z->value.dim(0), d = z->value.dim(1), K = c->value.dim(0);
    require(c->value.dim(1) == d, "pairwise_sqdist: feature dimension mismatch");
    Tensor<T> out({M, K});
    {
        auto Z = detail::as_mat(z->value, M, d);
        auto C = detail::as_mat(c->value, K, d);
        auto D = detail::as_mat(out, M, K);
        D.noalias() = T(-2) * (Z * C.transpose());
        Eigen::Array<T, Eigen::Dynamic, 1> zn = Z.rowwise().squaredNorm();
        Eigen::Array<T, Eigen::Dynamic, 1> cn = C.rowwise().squaredNorm();
        D.array().colwise() += zn;
        D.array().rowwise() += cn.transpose();
        D = D.cwiseMax(T(0));  // clamp the roundoff negatives
    }
    auto n = detail::make_node<T>(std::move(out), {z, c});
    n->backprop = [M, d, K](Node<T>& self) {
        auto G = detail::as_mat(self.grad, M, K);
        auto Z = detail::as_mat(self.parents[0]->value, M, d);
        auto C = detail::as_mat(self.parents[1]->value, K, d);
        if (self.parents[0]->requires_grad) {
            Tensor<T> gz({M, d});
            auto GZ = detail::as_mat(gz, M, d);
            GZ.noalias() = T(-2) * (G * C);
            Eigen::Array<T, Eigen::Dynamic, 1> rs = G.rowwise().sum();
            GZ.array() += T(2) * (Z.array().colwise() * rs);
            accumulate_grad(*self.parents[0], gz);
        }
        if (self.parents[1]->requires_grad) {
            Tensor<T> gc({K, d});
            auto GC = detail::as_mat(gc, K, d);
            GC.noalias() = T(-2) * (G.transpose() * Z);
            Eigen::Array<T, Eigen::Dynamic, 1> cs = G.colwise().sum().transpose();
            GC.array() += T(2) * (C.array().colwise() * cs);
            accumulate_grad(*self.parents[1], gc);
        }
    };
    return n;
}

/// Y[m] = C[idx[m]] : codeword lookup with scatter-add adjoint.
template <typename T>
NodePtr<T> gather_rows(const NodePtr<T>& c, std::vector<std::int64_t> idx) {
    require(c->value.rank() == 2, "gather_rows: rank-2 table required");
    const std::int64_t K = c->value.dim(0), d = c->value.dim(1);
    const std::int64_t M = static_cast<std::int64_t>(idx.size());
    for (auto i : idx) require(i >= 0 && i < K, "gather_rows: index out of range");
    Tensor<T> out({M, d});
    const T* pc = c->value.data();
    T* po = out.data();
    for (std::int64_t m = 0; m < M; ++m)
        std::copy(pc + idx[static_cast<std::size_t>(m)] * d,
                  pc + (idx[static_cast<std::size_t>(m)] + 1) * d, po + m * d);
    auto n = detail::make_node<T>(std::move(out), {c});
    n->backprop = [K, d, M, idx = std::move(idx)](Node<T>& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor<T> gc({K, d});
        const T* pg = self.grad.data();
        T* pc = gc.data();
        for (std::int64_t m = 0; m < M; ++m) {
            T* row = pc + idx[static_cast<std::size_t>(m)] * d;
            for (std::int64_t j = 0; j < d; ++j) row[j] += pg[m * d + j];
        }
        accumulate_grad(*self.parents[0], gc);
    };
    return n;
}

/// Straight-through node: forward takes the provided (quantized) values,
/// backward copies the gradient to `z` unchanged.
template <typename T>
NodePtr<T> straight_through(const NodePtr<T>& z, Tensor<T> quantized) {
    require(z->value.same_shape(quantized), "straight_through: shape mismatch");
    auto n = detail::make_node<T>(std::move(quantized), {z});
    n->backprop = [](Node<T>& self) {
        if (self.parents[0]->requires_grad) accumulate_grad(*self.parents[0], self.grad);
    };
    return n;
}

// ------------------------------------------------------------------- helpers

template <typename T>
NodePtr<T> square(const NodePtr<T>& x) {
    return mul(x, x);
}

/// Mean over all elements of the squared difference.
template <typename T>
NodePtr<T> mse(const NodePtr<T>& a, const NodePtr<T>& b) {
    return mean_all(square(sub(a, b)));
}

}  // namespace vqcsi::grad

#endif  // VQCSI_GRAD_OPS_HPP
