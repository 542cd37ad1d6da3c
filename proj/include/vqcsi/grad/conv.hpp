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
// 2-D convolution and transposed convolution via im2col + GEMM. The three
// kernels (forward, data gradient, weight gradient) are shared between the
// two ops: a transposed convolution is the data-gradient kernel run forward,
// so each op's backward reuses the other's forward machinery.

#ifndef VQCSI_GRAD_CONV_HPP
#define VQCSI_GRAD_CONV_HPP

#include <cstdint>
#include <vector>

#include "vqcsi/grad/ops.hpp"

namespace vqcsi::grad {

namespace detail {

struct ConvGeom {
    std::int64_t Ci, H, W;    // input plane
    std::int64_t kh, kw;      // kernel
    std::int64_t stride, pad;
    std::int64_t OH, OW;      // output plane
};

/// col[(ci*kh + ky)*kw + kx][oh*OW + ow] = x[ci][oh*s - p + ky][ow*s - p + kx],
/// zero where the source index falls outside the plane.
template <typename T>
void im2col(const T* x, const ConvGeom& g, T* col) {
    const std::int64_t cols = g.OH * g.OW;
    for (std::int64_t ci = 0; ci < g.Ci; ++ci)
        for (std::int64_t ky = 0; ky < g.kh; ++ky)
            for (std::int64_t kx = 0; kx < g.kw; ++kx) {
                T* crow = col + ((ci * g.kh + ky) * g.kw + kx) * cols;
                const T* plane = x + ci * g.H * g.W;
                for (std::int64_t oh = 0; oh < g.OH; ++oh) {
                    const std::int64_t ih = oh * g.stride - g.pad + ky;
                    if (ih < 0 || ih >= g.H) {
                        for (std::int64_t ow = 0; ow < g.OW; ++ow) crow[oh * g.OW + ow] = T(0);
                        continue;
                    }
                    for (std::int64_t ow = 0; ow < g.OW; ++ow) {
                        const std::int64_t iw = ow * g.stride - g.pad + kx;
                        crow[oh * g.OW + ow] =
                            (iw < 0 || iw >= g.W) ? T(0) : plane[ih * g.W + iw];
                    }
                }
            }
}

/// Adjoint of im2col: scatter-add the column matrix back onto the plane.
/// `x` must be zero-initialized by the caller.
template <typename T>
void col2im(const T* col, const ConvGeom& g, T* x) {
    const std::int64_t cols = g.OH * g.OW;
    for (std::int64_t ci = 0; ci < g.Ci; ++ci)
        for (std::int64_t ky = 0; ky < g.kh; ++ky)
            for (std::int64_t kx = 0; kx < g.kw; ++kx) {
                const T* crow = col + ((ci * g.kh + ky) * g.kw + kx) * cols;
                T* plane = x + ci * g.H * g.W;
                for (std::int64_t oh = 0; oh < g.OH; ++oh) {
                    const std::int64_t ih = oh * g.stride - g.pad + ky;
                    if (ih < 0 || ih >= g.H) continue;
                    for (std::int64_t ow = 0; ow < g.OW; ++ow) {
                        const std::int64_t iw = ow * g.stride - g.pad + kx;
                        if (iw >= 0 && iw < g.W) plane[ih * g.W + iw] += crow[oh * g.OW + ow];
                    }
                }
            }
}

/// y[b] = w_mat · im2col(x[b]) for every batch item.
template <typename T>
void conv_forward_kernel(const T* x, const T* w, std::int64_t B, std::int64_t Co,
                         const ConvGeom& g, T* y) {
    const std::int64_t krows = g.Ci * g.kh * g.kw;
    const std::int64_t cols = g.OH * g.OW;
    std::vector<T> col(static_cast<std::size_t>(krows * cols));
    ECMap<T> wm(w, Co, krows);
    for (std::int64_t b = 0; b < B; ++b) {
        im2col(x + b * g.Ci * g.H * g.W, g, col.data());
        EMap<T>(y + b * Co * cols, Co, cols).noalias() =
            wm * ECMap<T>(col.data(), krows, cols);
    }
}

/// gx[b] = col2im(w_matᵀ · gy[b]) for every batch item. `gx` must be zeroed.
template <typename T>
void conv_backward_data_kernel(const T* gy, const T* w, std::int64_t B, std::int64_t Co,
                               const ConvGeom& g, T* gx) {
    const std::int64_t krows = g.Ci * g.kh * g.kw;
    const std::int64_t cols = g.OH * g.OW;
    std::vector<T> col(static_cast<std::size_t>(krows * cols));
    ECMap<T> wm(w, Co, krows);
    for (std::int64_t b = 0; b < B; ++b) {
        EMap<T>(col.data(), krows, cols).noalias() =
            wm.transpose() * ECMap<T>(gy + b * Co * cols, Co, cols);
        col2im(col.data(), g, gx + b * g.Ci * g.H * g.W);
    }
}

/// gw = Σ_b gy[b] · im2col(x[b])ᵀ. `gw` must be zeroed.
template <typename T>
void conv_backward_weight_kernel(const T* gy, const T* x, std::int64_t B, std::int64_t Co,
                                 const ConvGeom& g, T* gw) {
    const std::int64_t krows = g.Ci * g.kh * g.kw;
    const std::int64_t cols = g.OH * g.OW;
    std::vector<T> col(static_cast<std::size_t>(krows * cols));
    EMap<T> gwm(gw, Co, krows);
    for (std::int64_t b = 0; b < B; ++b) {
        im2col(x + b * g.Ci * g.H * g.W, g, col.data());
        gwm.noalias() += ECMap<T>(gy + b * Co * cols, Co, cols) *
                         ECMap<T>(col.data(), krows, cols).transpose();
    }
}

}  // namespace detail

/// conv2d: x[B, Ci, H, W], w[Co, Ci, kh, kw] -> y[B, Co, OH, OW].
/// The padded extent must tile exactly: (H + 2 pad - kh) divisible by stride.
template <typename T>
NodePtr<T> conv2d(const NodePtr<T>& x, const NodePtr<T>& w, std::int64_t stride,
                  std::int64_t pad) {
    require(x->value.rank() == 4 && w->value.rank() == 4, "conv2d: NCHW input and OIHW weight");
    require(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
    const std::int64_t B = x->value.dim(0), Ci = x->value.dim(1);
    const std::int64_t H = x->value.dim(2), W = x->value.dim(3);
    const std::int64_t Co = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
    require(w->value.dim(1) == Ci, "conv2d: channel mismatch");
    require((H + 2 * pad - kh) % stride == 0 && (W + 2 * pad - kw) % stride == 0,
            "conv2d: geometry does not tile");
    detail::ConvGeom g{Ci, H, W, kh, kw, stride, pad,
                       (H + 2 * pad - kh) / stride + 1, (W + 2 * pad - kw) / stride + 1};
    Tensor<T> out({B, Co, g.OH, g.OW});
    detail::conv_forward_kernel(x->value.data(), w->value.data(), B, Co, g, out.data());
    auto n = detail::make_node<T>(std::move(out), {x, w});
    n->backprop = [B, Co, g](Node<T>& self) {
        if (self.parents[0]->requires_grad) {
            Tensor<T> gx(self.parents[0]->value.shape());
            detail::conv_backward_data_kernel(self.grad.data(), self.parents[1]->value.data(), B,
                                              Co, g, gx.data());
            accumulate_grad(*self.parents[0], gx);
        }
        if (self.parents[1]->requires_grad) {
            Tensor<T> gw(self.parents[1]->value.shape());
            detail::conv_backward_weight_kernel(self.grad.data(), self.parents[0]->value.data(),
                                                B, Co, g, gw.data());
            accumulate_grad(*self.parents[1], gw);
        }
    };
    return n;
}

/// conv_transpose2d: x[B, Ci, H, W], w[Ci, Co, kh, kw] -> y[B, Co, OH, OW]
/// with OH = (H - 1) stride - 2 pad + kh: the exact adjoint of a conv2d that
/// maps [OH, OW] planes down to [H, W].
template <typename T>
NodePtr<T> conv_transpose2d(const NodePtr<T>& x, const NodePtr<T>& w, std::int64_t stride,
                            std::int64_t pad) {
    require(x->value.rank() == 4 && w->value.rank() == 4,
            "conv_transpose2d: NCHW input and IOHW weight");
    require(stride >= 1 && pad >= 0, "conv_transpose2d: bad stride/pad");
    const std::int64_t B = x->value.dim(0), Ci = x->value.dim(1);
    const std::int64_t H = x->value.dim(2), W = x->value.dim(3);
    const std::int64_t Co = w->value.dim(1), kh = w->value.dim(2), kw = w->value.dim(3);
    require(w->value.dim(0) == Ci, "conv_transpose2d: channel mismatch");
    const std::int64_t OH = (H - 1) * stride - 2 * pad + kh;
    const std::int64_t OW = (W - 1) * stride - 2 * pad + kw;
    require(OH >= 1 && OW >= 1, "conv_transpose2d: output collapses to nothing");
    // geometry is phrased for the underlying (adjoint) conv: [OH, OW] -> [H, W]
    detail::ConvGeom g{Co, OH, OW, kh, kw, stride, pad, H, W};
    Tensor<T> out({B, Co, OH, OW});
    detail::conv_backward_data_kernel(x->value.data(), w->value.data(), B, Ci, g, out.data());
    auto n = detail::make_node<T>(std::move(out), {x, w});
    n->backprop = [B, Ci, g](Node<T>& self) {
        if (self.parents[0]->requires_grad) {
            Tensor<T> gx(self.parents[0]->value.shape());
            detail::conv_forward_kernel(self.grad.data(), self.parents[1]->value.data(), B, Ci, g,
                                        gx.data());
            accumulate_grad(*self.parents[0], gx);
        }
        if (self.parents[1]->requires_grad) {
            Tensor<T> gw(self.parents[1]->value.shape());
            detail::conv_backward_weight_kernel(self.parents[0]->value.data(), self.grad.data(),
                                                B, Ci, g, gw.data());
            accumulate_grad(*self.parents[1], gw);
        }
    };
    return n;
}

}  // namespace vqcsi::grad

#endif  // VQCSI_GRAD_CONV_HPP
