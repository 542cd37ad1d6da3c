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

#ifndef VQCSI_RNG_HPP
#define VQCSI_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

namespace vqcsi {

/// Deterministic random stream (splitmix64 core, hand-rolled distributions).
///
/// Every stochastic component in the library draws from one of these, so a
/// run is reproducible bit-for-bit from its seed alone, independent of the
/// standard library's distribution implementations. Substreams are derived
/// by hashing a label and index into the parent seed, which lets samples,
/// sweep points, and epochs own independent streams that do not depend on
/// evaluation order.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // decorrelate trivially close seeds
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // modulo bias is negligible for n << 2^64 but reject anyway
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    /// Standard normal via Box-Muller (no cached spare: keeps streams splittable).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Child stream labeled by (tag, index); independent of draw order on the parent.
    Rng substream(std::string_view tag, std::uint64_t index = 0) const {
        std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the tag
        for (char c : tag) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001b3ull;
        }
        h ^= index + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        return Rng(state_ ^ h);
    }

  private:
    std::uint64_t state_;
};

}  // namespace vqcsi

#endif  // VQCSI_RNG_HPP
