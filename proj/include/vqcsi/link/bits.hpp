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

#ifndef VQCSI_LINK_BITS_HPP
#define VQCSI_LINK_BITS_HPP

#include <cstdint>
#include <vector>

namespace vqcsi::link {

/// Reflected binary code: neighbors n, n+1 differ in exactly one bit.
std::uint32_t gray_encode(std::uint32_t n);
std::uint32_t gray_decode(std::uint32_t g);

/// Bits needed to address a codebook of `k` entries; `k` must be a power of
/// two and at least 2.
int bits_per_index(std::uint32_t k);

/// MSB-first fixed-width expansion, appended to `out`.
void append_bits(std::uint32_t value, int width, std::vector<std::uint8_t>& out);

/// MSB-first fixed-width read starting at `offset`.
std::uint32_t read_bits(const std::vector<std::uint8_t>& bits, std::size_t offset, int width);

/// Codebook indices to a Gray-labeled bit stream, `width` bits per index.
std::vector<std::uint8_t> indices_to_bits(const std::vector<std::uint32_t>& indices, int width);

/// Inverse of indices_to_bits. The bit count must be a multiple of `width`.
std::vector<std::uint32_t> bits_to_indices(const std::vector<std::uint8_t>& bits, int width);

}  // namespace vqcsi::link

#endif  // VQCSI_LINK_BITS_HPP
