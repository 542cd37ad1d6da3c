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
// Spherical-wave multipath channel synthesis for a uniform linear array
// large enough that users sit in its radiating near field.

#ifndef VQCSI_CHANNEL_CHANNEL_HPP
#define VQCSI_CHANNEL_CHANNEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "vqcsi/rng.hpp"

namespace vqcsi::channel {

inline constexpr double kSpeedOfLight = 299792458.0;

struct ArrayGeometry {
    std::int64_t num_antennas = 0;
    double carrier_freq_hz = 0;
    double element_spacing_m = 0;

    double wavelength_m() const { return kSpeedOfLight / carrier_freq_hz; }

    /// Distance beyond which the array's far-field approximation holds
    /// (2 D^2 / lambda for aperture D).
    double rayleigh_distance_m() const {
        const double aperture = static_cast<double>(num_antennas - 1) * element_spacing_m;
        return 2.0 * aperture * aperture / wavelength_m();
    }

    void validate() const;

    static ArrayGeometry half_wavelength(std::int64_t num_antennas, double carrier_freq_hz);
};

struct ScenarioConfig {
    ArrayGeometry geometry;
    std::int64_t num_subcarriers = 0;
    double bandwidth_hz = 0;
    std::int64_t num_paths = 0;
    double range_min_m = 0;
    double range_max_m = 0;
    double angle_min = 0;  // sin-angle interval occupied by users
    double angle_max = 0;
    double max_delay_s = 0;
    std::uint64_t seed = 0;

    void validate() const;

    /// 64 antennas x 64 subcarriers at 100 GHz: a bench-sized near-field
    /// setup (Rayleigh distance about 6 m, users at 2-6 m in a narrow
    /// sector so a fixed truncation mask stays energy-complete).
    static ScenarioConfig desk_default();

    /// The full-size setup: 256 antennas, 1024 subcarriers, users 20-60 m.
    static ScenarioConfig paper_scale();
};

/// One propagation path of the synthetic channel.
struct PathRealization {
    std::complex<double> gain;
    double delay_s;
    double sin_angle;
    double range_m;
};

/// Spherical-wave array response: entry n is
/// exp(-j (2 pi / lambda) (r_n - r)) / sqrt(N) with
/// r_n = sqrt(r^2 + d_n^2 d^2 - 2 r d_n d sin_angle), d_n = (2n - N + 1)/2.
Eigen::VectorXcd steering_vector(double sin_angle, double distance_m, const ArrayGeometry& g);

/// Deterministic synthesis from explicit paths: column m of H is
/// sum_l gain_l exp(-j 2 pi f_m delay_l) a(angle_l, range_l) with
/// f_m = m * bandwidth / N_s.
Eigen::MatrixXcd synth_from_paths(const ArrayGeometry& g, std::int64_t num_subcarriers,
                                  double bandwidth_hz, const std::vector<PathRealization>& paths);

/// Draw the paths of one channel sample from the scenario's distributions.
/// Path 0 has unit gain power; the rest carry 0.3 of it.
std::vector<PathRealization> draw_paths(const ScenarioConfig& cfg, Rng& rng);

/// One random channel sample (N x N_s).
Eigen::MatrixXcd generate_channel(const ScenarioConfig& cfg, Rng& rng);

}  // namespace vqcsi::channel

#endif  // VQCSI_CHANNEL_CHANNEL_HPP
