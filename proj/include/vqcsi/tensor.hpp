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

#ifndef VQCSI_TENSOR_HPP
#define VQCSI_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "vqcsi/errors.hpp"
#include "vqcsi/rng.hpp"

namespace vqcsi {

/// Dense row-major real array of arbitrary rank.
///
/// Deliberately minimal: contiguous storage plus a shape. All numeric work
/// happens in the operator kernels, which map the buffers into Eigen views.
template <typename T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<std::size_t>(count(shape_)), T(0));
    }

    Tensor(std::vector<std::int64_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        require(static_cast<std::int64_t>(data_.size()) == count(shape_),
                "tensor: data size does not match shape");
    }

    static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::int64_t> shape, T v) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    /// i.i.d. uniform in [-a, a].
    static Tensor uniform(std::vector<std::int64_t> shape, T a, Rng& rng) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = static_cast<T>(rng.uniform(-a, a));
        return t;
    }

    /// i.i.d. normal with the given standard deviation.
    static Tensor normal(std::vector<std::int64_t> shape, T stddev, Rng& rng) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = static_cast<T>(rng.normal() * stddev);
        return t;
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const { return shape_.size(); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(T v) {
        for (auto& x : data_) x = v;
    }

    Tensor reshaped(std::vector<std::int64_t> shape) const {
        require(count(shape) == numel(), "tensor: reshape changes element count");
        return Tensor(std::move(shape), data_);
    }

    bool all_finite() const {
        for (const T& x : data_)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    /// Convert element type (float <-> double).
    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> d(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(d));
    }

    static std::int64_t count(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (auto s : shape) {
            require(s >= 0, "tensor: negative dimension");
            n *= s;
        }
        return n;
    }

  private:
    std::vector<std::int64_t> shape_;
    std::vector<T> data_;
};

}  // namespace vqcsi

#endif  // VQCSI_TENSOR_HPP
