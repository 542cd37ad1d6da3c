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

#ifndef VQCSI_GRAD_ADAM_HPP
#define VQCSI_GRAD_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <unordered_map>

#include "vqcsi/grad/param_store.hpp"

namespace vqcsi::grad {

/// Cosine annealing from `lr0` down to zero over `total` steps.
template <typename T>
T cosine_lr(T lr0, std::int64_t step, std::int64_t total) {
    require(total > 0, "cosine_lr: total steps must be positive");
    if (step >= total) return T(0);
    const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
    return lr0 * static_cast<T>(0.5 * (1.0 + std::cos(phase)));
}

/// Adam with bias-corrected moment estimates. Parameters absent from the
/// current step's graph keep their moments untouched; the step counter is
/// global, as in the reference formulation.
template <typename T>
class Adam {
  public:
    explicit Adam(T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// Apply one update to every trainable parameter whose gradient is ready,
    /// then clear all parameter gradients.
    void step(ParamStore<T>& store, T lr) {
        ++t_;
        const T c1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
        const T c2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
        for (const auto& name : store.names()) {
            if (!store.trainable(name)) continue;
            auto node = store.at(name);
            if (!node->grad_ready) continue;
            Tensor<T>& m = moment(m_, name, node->value);
            Tensor<T>& v = moment(v_, name, node->value);
            T* pm = m.data();
            T* pv = v.data();
            T* pw = node->value.data();
            const T* pg = node->grad.data();
            for (std::int64_t i = 0; i < node->value.numel(); ++i) {
                pm[i] = beta1_ * pm[i] + (T(1) - beta1_) * pg[i];
                pv[i] = beta2_ * pv[i] + (T(1) - beta2_) * pg[i] * pg[i];
                const T mhat = pm[i] / c1;
                const T vhat = pv[i] / c2;
                pw[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
            }
        }
        store.clear_grads();
    }

    std::int64_t steps() const { return t_; }

    /// Serialize moments and step count into checkpoint arrays.
    void save_into(Checkpoint<T>& ck) const {
        ck.meta["adam_steps"] = std::to_string(t_);
        for (const auto& [name, m] : m_) ck.arrays.push_back({'m', name, m});
        for (const auto& [name, v] : v_) ck.arrays.push_back({'v', name, v});
    }

    /// Restore moments and step count; arrays of other kinds are ignored.
    void restore_from(const Checkpoint<T>& ck) {
        m_.clear();
        v_.clear();
        t_ = 0;
        auto it = ck.meta.find("adam_steps");
        if (it != ck.meta.end()) t_ = std::stoll(it->second);
        for (const auto& a : ck.arrays) {
            if (a.kind == 'm') m_[a.name] = a.tensor;
            if (a.kind == 'v') v_[a.name] = a.tensor;
        }
    }

  private:
    static Tensor<T>& moment(std::unordered_map<std::string, Tensor<T>>& slot,
                             const std::string& name, const Tensor<T>& like) {
        auto it = slot.find(name);
        if (it == slot.end()) it = slot.emplace(name, Tensor<T>::zeros(like.shape())).first;
        require(it->second.same_shape(like), "adam: moment shape mismatch for '" + name + "'");
        return it->second;
    }

    T beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::unordered_map<std::string, Tensor<T>> m_;
    std::unordered_map<std::string, Tensor<T>> v_;
};

}  // namespace vqcsi::grad

#endif  // VQCSI_GRAD_ADAM_HPP
