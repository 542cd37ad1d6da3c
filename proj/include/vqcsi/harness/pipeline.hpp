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
// Data preparation shared by the subcommands: dataset-file to sparse input
// tensors through the polar-delay transform, plus the scalar-quantizer
// feedback baseline that needs no trained model.

#ifndef VQCSI_HARNESS_PIPELINE_HPP
#define VQCSI_HARNESS_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "vqcsi/harness/experiment.hpp"
#include "vqcsi/harness/sweep.hpp"
#include "vqcsi/polar/polar.hpp"
#include "vqcsi/tensor.hpp"

namespace vqcsi::harness {

/// Polar-delay operators for the experiment's scenario.
polar::TransformOperators build_transform(const ExperimentConfig& cfg);

/// Energy-ranked truncation mask computed from the dataset's training split.
polar::SelectionMask compute_mask(const ExperimentConfig& cfg,
                                  const polar::TransformOperators& ops);

/// Fraction of the training split's mean transform energy that the mask
/// keeps, sum over selected (row, col) cells of |S|^2 over the full-grid sum.
double mask_energy_fraction(const ExperimentConfig& cfg, const polar::TransformOperators& ops,
                            const polar::SelectionMask& mask);

/// Sparse network inputs per split, each [n, 2, N_p, N_d]; samples follow
/// the deterministic 10:3:2 split of the dataset file.
struct SparseSplits {
    Tensor<double> train;
    Tensor<double> test;
    Tensor<double> val;

    const Tensor<double>& by_name(const std::string& name) const;
};

SparseSplits prepare_sparse_splits(const ExperimentConfig& cfg,
                                   const polar::TransformOperators& ops,
                                   const polar::SelectionMask& mask);

/// First `count` rows of a sample tensor (0 keeps everything).
Tensor<double> take_rows(const Tensor<double>& samples, std::int64_t count);

/// Separate source/channel-coded feedback baseline: per-entry uniform
/// midrise quantization of the sparse inputs to `quant_bits` (range fit to
/// the evaluated samples), Gray-labeled bits, optional Hamming(7,4), QPSK
/// over AWGN, hard decisions, decode, dequantize. One row per test SNR;
/// `feedback_bits` counts transmitted channel bits per sample (the code
/// expands the payload). Deterministic for a fixed seed.
std::vector<SweepPoint> sscc_baseline(const Tensor<double>& samples,
                                      const std::vector<double>& snr_list,
                                      std::int64_t quant_bits, bool hamming74,
                                      std::int64_t trials, std::uint64_t seed);

/// Mean squared quantization error ratio of the baseline's quantizer on
/// `samples` (its noiseless NMSE, as a plain ratio before the dB map).
double sscc_quantizer_distortion(const Tensor<double>& samples, std::int64_t quant_bits);

}  // namespace vqcsi::harness

#endif  // VQCSI_HARNESS_PIPELINE_HPP
