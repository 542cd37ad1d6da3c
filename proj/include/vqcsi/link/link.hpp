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
// Feedback link: Gray-labeled codebook indices ride QPSK symbols through
// an AWGN channel, with an optional Hamming(7,4) wrapper and a cheap
// bit-flip surrogate for use inside training loops.

#ifndef VQCSI_LINK_LINK_HPP
#define VQCSI_LINK_LINK_HPP

#include <complex>
#include <cstdint>
#include <vector>

#include "vqcsi/link/bits.hpp"
#include "vqcsi/rng.hpp"

namespace vqcsi::link {

struct LinkConfig {
    double snr_db = 10.0;       // per-symbol SNR (unit symbol energy)
    bool hamming74 = false;     // wrap the bit stream in Hamming(7,4)
};

/// Gray-mapped QPSK, unit energy: bit pair (b0, b1) becomes
/// ((1-2 b0) + j (1-2 b1)) / sqrt(2), so 00 lands at (1+j)/sqrt(2).
/// An odd trailing bit is padded with zero.
std::vector<std::complex<double>> bits_to_symbols(const std::vector<std::uint8_t>& bits);

/// Quadrant hard decisions; `bit_count` trims the pad bit.
std::vector<std::uint8_t> symbols_to_bits(const std::vector<std::complex<double>>& symbols,
                                          std::size_t bit_count);

/// Adds circular complex Gaussian noise of total variance 10^(-snr_db/10)
/// to each symbol in place.
void awgn(std::vector<std::complex<double>>& symbols, double snr_db, Rng& rng);

/// Exact QPSK bit-error rate over AWGN at per-symbol SNR gamma:
/// Q(sqrt(gamma)) with gamma = 10^(snr_db/10).
double qpsk_ber(double snr_db);

/// Systematic-free Hamming(7,4): data block d1 d2 d3 d4 becomes
/// p1 p2 d1 p3 d2 d3 d4 with even parity over the classic position sets.
/// Input length must be a multiple of 4.
std::vector<std::uint8_t> hamming74_encode(const std::vector<std::uint8_t>& bits);

/// Corrects any single bit error per 7-bit block. Input length must be a
/// multiple of 7.
std::vector<std::uint8_t> hamming74_decode(const std::vector<std::uint8_t>& coded);

/// Full modem chain: indices -> Gray bits (-> Hamming) -> QPSK -> AWGN ->
/// hard decisions (-> decode) -> indices.
std::vector<std::uint32_t> transmit_indices(const std::vector<std::uint32_t>& indices, int width,
                                            const LinkConfig& cfg, Rng& rng);

/// Training-time surrogate of the modem: flips each Gray bit of each index
/// independently with probability `ber`. Matches transmit_indices in
/// distribution when ber = qpsk_ber(snr_db) and no coding is used.
std::vector<std::uint32_t> corrupt_indices(const std::vector<std::uint32_t>& indices, int width,
                                           double ber, Rng& rng);

}  // namespace vqcsi::link

#endif  // VQCSI_LINK_LINK_HPP
