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

#include "vqcsi/link/link.hpp"

#include <cmath>

#include "vqcsi/errors.hpp"

namespace vqcsi::link {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;

std::uint8_t parity(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
    return static_cast<std::uint8_t>(a ^ b ^ c);
}

}  // namespace

std::vector<std::complex<double>> bits_to_symbols(const std::vector<std::uint8_t>& bits) {
    std::vector<std::complex<double>> symbols((bits.size() + 1) / 2);
    for (std::size_t s = 0; s < symbols.size(); ++s) {
        const std::uint8_t b0 = bits[2 * s];
        const std::uint8_t b1 = (2 * s + 1 < bits.size()) ? bits[2 * s + 1] : 0;
        require(b0 <= 1 && b1 <= 1, "bit stream entries must be 0 or 1");
        symbols[s] = std::complex<double>((1.0 - 2.0 * b0) * kInvSqrt2,
                                          (1.0 - 2.0 * b1) * kInvSqrt2);
    }
    return symbols;
}

std::vector<std::uint8_t> symbols_to_bits(const std::vector<std::complex<double>>& symbols,
                                          std::size_t bit_count) {
    require(bit_count <= 2 * symbols.size(), "bit count exceeds the symbol stream capacity");
    require(2 * symbols.size() - bit_count <= 1, "symbol stream carries more than one pad bit");
    std::vector<std::uint8_t> bits(bit_count);
    for (std::size_t i = 0; i < bit_count; ++i) {
        const std::complex<double>& s = symbols[i / 2];
        const double component = (i % 2 == 0) ? s.real() : s.imag();
        bits[i] = component < 0 ? 1 : 0;
    }
    return bits;
}

void awgn(std::vector<std::complex<double>>& symbols, double snr_db, Rng& rng) {
    const double sigma2 = std::pow(10.0, -snr_db / 10.0);
    const double component_dev = std::sqrt(sigma2 / 2.0);
    for (std::complex<double>& s : symbols) {
        s += std::complex<double>(component_dev * rng.normal(), component_dev * rng.normal());
    }
}

double qpsk_ber(double snr_db) {
    const double gamma = std::pow(10.0, snr_db / 10.0);
    // Q(x) = erfc(x / sqrt 2) / 2
    return 0.5 * std::erfc(std::sqrt(gamma) * kInvSqrt2);
}

std::vector<std::uint8_t> hamming74_encode(const std::vector<std::uint8_t>& bits) {
    require(bits.size() % 4 == 0, "Hamming(7,4) input must be a multiple of 4 bits");
    std::vector<std::uint8_t> coded;
    coded.reserve(bits.size() / 4 * 7);
    for (std::size_t i = 0; i < bits.size(); i += 4) {
        const std::uint8_t d1 = bits[i], d2 = bits[i + 1], d3 = bits[i + 2], d4 = bits[i + 3];
        require(d1 <= 1 && d2 <= 1 && d3 <= 1 && d4 <= 1, "bit stream entries must be 0 or 1");
        const std::uint8_t p1 = parity(d1, d2, d4);
        const std::uint8_t p2 = parity(d1, d3, d4);
        const std::uint8_t p3 = parity(d2, d3, d4);
        coded.insert(coded.end(), {p1, p2, d1, p3, d2, d3, d4});
    }
    return coded;
}

std::vector<std::uint8_t> hamming74_decode(const std::vector<std::uint8_t>& coded) {
    require(coded.size() % 7 == 0, "Hamming(7,4) stream must be a multiple of 7 bits");
    std::vector<std::uint8_t> bits;
    bits.reserve(coded.size() / 7 * 4);
    for (std::size_t i = 0; i < coded.size(); i += 7) {
        std::uint8_t block[7];
        for (int j = 0; j < 7; ++j) {
            block[j] = coded[i + static_cast<std::size_t>(j)];
            require(block[j] <= 1, "bit stream entries must be 0 or 1");
        }
        // syndrome bit k checks the positions whose 1-based index has bit k set
        const int s1 = block[0] ^ block[2] ^ block[4] ^ block[6];
        const int s2 = block[1] ^ block[2] ^ block[5] ^ block[6];
        const int s3 = block[3] ^ block[4] ^ block[5] ^ block[6];
        const int error_pos = s1 + 2 * s2 + 4 * s3;
        if (error_pos != 0) block[error_pos - 1] ^= 1;
        bits.insert(bits.end(), {block[2], block[4], block[5], block[6]});
    }
    return bits;
}

std::vector<std::uint32_t> transmit_indices(const std::vector<std::uint32_t>& indices, int width,
                                            const LinkConfig& cfg, Rng& rng) {
    std::vector<std::uint8_t> bits = indices_to_bits(indices, width);
    const std::size_t payload_bits = bits.size();

    if (cfg.hamming74) {
        while (bits.size() % 4 != 0) bits.push_back(0);
        bits = hamming74_encode(bits);
    }

    std::vector<std::complex<double>> symbols = bits_to_symbols(bits);
    awgn(symbols, cfg.snr_db, rng);
    std::vector<std::uint8_t> received = symbols_to_bits(symbols, bits.size());

    if (cfg.hamming74) {
        received = hamming74_decode(received);
        received.resize(payload_bits);
    }
    return bits_to_indices(received, width);
}

std::vector<std::uint32_t> corrupt_indices(const std::vector<std::uint32_t>& indices, int width,
                                           double ber, Rng& rng) {
    require(ber >= 0.0 && ber <= 1.0, "bit error rate must lie in [0, 1]");
    require(width >= 1 && width <= 32, "index width must lie in [1, 32]");
    const std::uint32_t mask =
        (width == 32) ? 0xFFFFFFFFu : ((std::uint32_t{1} << width) - 1);

    std::vector<std::uint32_t> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        require(indices[i] <= mask, "index does not fit in the configured width");
        std::uint32_t g = gray_encode(indices[i]);
        for (int b = 0; b < width; ++b) {
            if (rng.bernoulli(ber)) g ^= (std::uint32_t{1} << b);
        }
        out[i] = gray_decode(g);
    }
    return out;
}

}  // namespace vqcsi::link
