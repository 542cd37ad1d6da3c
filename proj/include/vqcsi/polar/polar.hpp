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
// Polar-delay representation of near-field channels: project the antenna
// dimension onto a grid of focused steering vectors (sin-angles x distance
// rings) and the subcarrier dimension onto delay taps, then keep only a
// fixed high-energy block.

#ifndef VQCSI_POLAR_POLAR_HPP
#define VQCSI_POLAR_POLAR_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "vqcsi/channel/channel.hpp"
#include "vqcsi/tensor.hpp"

namespace vqcsi::polar {

struct TransformOperators {
    Eigen::MatrixXcd polar;  // [G x N], row (s, g) is the conjugated steering
                             // vector at sin-angle g and ring distance ref/s
    Eigen::MatrixXcd delay;  // [N_s x N_s], unitary DFT
    std::int64_t num_angles = 0;
    std::int64_t num_rings = 0;
    double ring_reference_m = 0;

    std::int64_t grid_rows() const { return num_angles * num_rings; }
};

/// Polar rows come in ring-major order: row (s-1)*N + g is ring s in 1..S at
/// distance ring_reference_m / s, sin-angle -1 + 2g/N. Delay entry [m][n] is
/// exp(-j 2 pi m n / N_s) / sqrt(N_s).
TransformOperators build_operators(const channel::ArrayGeometry& geometry,
                                   std::int64_t num_subcarriers, std::int64_t num_rings,
                                   double ring_reference_m);

/// Full polar-delay image of a channel: polar * H * delay^H, [G x N_s].
Eigen::MatrixXcd full_transform(const TransformOperators& ops, const Eigen::MatrixXcd& h);

/// Recover H from its full polar-delay image (least squares over the polar
/// grid; exact when the polar dictionary is square and invertible).
Eigen::MatrixXcd invert_full(const TransformOperators& ops, const Eigen::MatrixXcd& s_full);

/// Index sets selecting the retained block of the full transform. Both lists
/// are strictly increasing.
struct SelectionMask {
    std::vector<std::int64_t> polar_rows;
    std::vector<std::int64_t> delay_cols;

    void validate(std::int64_t grid_rows, std::int64_t num_subcarriers) const;
};

void save_mask(const std::string& path, const SelectionMask& mask);
SelectionMask load_mask(const std::string& path);

/// Streaming mean-energy statistics for mask selection.
class MaskAccumulator {
  public:
    explicit MaskAccumulator(const TransformOperators& ops);

    void add(const Eigen::MatrixXcd& h);

    /// Picks the num_polar_rows rows of highest mean energy (ties resolved
    /// toward the lower index) and the first num_delay_cols delay columns.
    SelectionMask finalize(std::int64_t num_polar_rows, std::int64_t num_delay_cols) const;

  private:
    const TransformOperators& ops_;
    Eigen::VectorXd row_energy_;
    std::int64_t count_ = 0;
};

/// Mask from an in-memory sample set.
SelectionMask compute_truncation_mask(const TransformOperators& ops,
                                      const std::vector<Eigen::MatrixXcd>& samples,
                                      std::int64_t num_polar_rows, std::int64_t num_delay_cols);

/// Masked transform split into real and imaginary planes: [2, N_p, N_d].
Tensor<double> to_sparse(const TransformOperators& ops, const SelectionMask& mask,
                         const Eigen::MatrixXcd& h);

/// Place a [2, N_p, N_d] block back into a zero-filled full image [G x N_s].
Eigen::MatrixXcd sparse_to_full(const TransformOperators& ops, const SelectionMask& mask,
                                const Tensor<double>& sparse);

/// Fraction of the full image's squared magnitude kept by the mask.
double retained_energy(const TransformOperators& ops, const SelectionMask& mask,
                       const Eigen::MatrixXcd& h);

}  // namespace vqcsi::polar

#endif  // VQCSI_POLAR_POLAR_HPP
