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
// Result rows shared by every evaluation path (trained models, baselines).

#ifndef VQCSI_HARNESS_SWEEP_HPP
#define VQCSI_HARNESS_SWEEP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vqcsi/errors.hpp"

namespace vqcsi::harness {

/// One evaluation point. The core columns are (snr_test_db, feedback_bits,
/// nmse_db, index_error_rate, model_id); the perplexities are diagnostics
/// carried by the ablation table only.
struct SweepPoint {
    double snr_test_db = 0;
    std::int64_t feedback_bits = 0;
    double nmse_db = 0;
    double index_error_rate = 0;
    std::string model_id;
    double perp_bottom = 0;
    double perp_top = 0;
};

inline constexpr double kNmseFloorDb = -100.0;

/// Set-average normalized squared error in decibels:
/// 10*log10(mean_i ||H_i - Hhat_i||^2 / ||H_i||^2), floored at -100 dB.
inline double nmse_db_from_ratios(const std::vector<double>& ratios) {
    require(!ratios.empty(), "nmse: empty evaluation set");
    double acc = 0;
    for (const double r : ratios) {
        require(std::isfinite(r) && r >= 0, "nmse: ratios must be finite and non-negative");
        acc += r;
    }
    const double mean = acc / static_cast<double>(ratios.size());
    if (mean <= 0) return kNmseFloorDb;
    return std::max(10.0 * std::log10(mean), kNmseFloorDb);
}

/// Deterministic presentation order: by feedback bits, then test SNR.
inline void sort_sweep(std::vector<SweepPoint>& points) {
    std::stable_sort(points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
        if (a.feedback_bits != b.feedback_bits) return a.feedback_bits < b.feedback_bits;
        return a.snr_test_db < b.snr_test_db;
    });
}

}  // namespace vqcsi::harness

#endif  // VQCSI_HARNESS_SWEEP_HPP
