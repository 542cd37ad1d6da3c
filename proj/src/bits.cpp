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

#include "vqcsi/link/bits.hpp"

#include <bit>

#include "vqcsi/errors.hpp"

namespace vqcsi::link {

std::uint32_t gray_encode(std::uint32_t n) { return n ^ (n >> 1); }

std::uint32_t gray_decode(std::uint32_t g) {
    std::uint32_t n = g;
    n ^= n >> 1;
    n ^= n >> 2;
    n ^= n >> 4;
    n ^= n >> 8;
    n ^= n >> 16;
    return n;
}

int bits_per_index(std::uint32_t k) {
    require(k >= 2 && std::has_single_bit(k), "bits: codebook size must be a power of two >= 2");
    return std::countr_zero(k);
}

void append_bits(std::uint32_t value, int width, std::vector<std::uint8_t>& out) {
    require(width >= 1 && width <= 32, "bits: width out of range");
    require(width == 32 || value < (1u << width), "bits: value does not fit the width");
    for (int i = width - 1; i >= 0; --i)
        out.push_back(static_cast<std::uint8_t>((value >> i) & 1u));
}

std::uint32_t read_bits(const std::vector<std::uint8_t>& bits, std::size_t offset, int width) {
    require(width >= 1 && width <= 32, "bits: width out of range");
    require(offset + static_cast<std::size_t>(width) <= bits.size(), "bits: read past the end");
    std::uint32_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 1) | (bits[offset + static_cast<std::size_t>(i)] & 1u);
    return v;
}

std::vector<std::uint8_t> indices_to_bits(const std::vector<std::uint32_t>& indices, int width) {
    std::vector<std::uint8_t> out;
    out.reserve(indices.size() * static_cast<std::size_t>(width));
    for (auto idx : indices) append_bits(gray_encode(idx), width, out);
    return out;
}

std::vector<std::uint32_t> bits_to_indices(const std::vector<std::uint8_t>& bits, int width) {
    require(width >= 1, "bits: width out of range");
    require(bits.size() % static_cast<std::size_t>(width) == 0,
            "bits: stream length is not a multiple of the index width");
    std::vector<std::uint32_t> out;
    out.reserve(bits.size() / static_cast<std::size_t>(width));
    for (std::size_t off = 0; off < bits.size(); off += static_cast<std::size_t>(width))
        out.push_back(gray_decode(read_bits(bits, off, width)));
    return out;
}

}  // namespace vqcsi::link
