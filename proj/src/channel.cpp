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

#include "vqcsi/channel/channel.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "vqcsi/errors.hpp"

namespace vqcsi::channel {

void ArrayGeometry::validate() const {
    require(num_antennas >= 2, "array needs at least 2 antennas");
    require(carrier_freq_hz > 0, "carrier frequency must be positive");
    require(element_spacing_m > 0, "element spacing must be positive");
}

ArrayGeometry ArrayGeometry::half_wavelength(std::int64_t num_antennas, double carrier_freq_hz) {
    ArrayGeometry g;
    g.num_antennas = num_antennas;
    g.carrier_freq_hz = carrier_freq_hz;
    g.element_spacing_m = 0.5 * kSpeedOfLight / carrier_freq_hz;
    g.validate();
    return g;
}

void ScenarioConfig::validate() const {
    geometry.validate();
    require(num_subcarriers >= 2, "need at least 2 subcarriers");
    require(bandwidth_hz > 0, "bandwidth must be positive");
    require(num_paths >= 1, "need at least one path");
    require(range_min_m > 0 && range_max_m >= range_min_m, "invalid range interval");
    require(angle_min >= -1.0 && angle_max <= 1.0 && angle_min <= angle_max,
            "sin-angle interval must lie in [-1, 1]");
    require(max_delay_s >= 0, "max delay must be non-negative");
    require(max_delay_s * bandwidth_hz < static_cast<double>(num_subcarriers),
            "delay spread exceeds the resolvable window");
}

ScenarioConfig ScenarioConfig::desk_default() {
    ScenarioConfig cfg;
    cfg.geometry = ArrayGeometry::half_wavelength(64, 100e9);
    cfg.num_subcarriers = 64;
    cfg.bandwidth_hz = 400e6;
    cfg.num_paths = 3;
    cfg.range_min_m = 2.0;
    cfg.range_max_m = 6.0;
    cfg.angle_min = -0.125;
    cfg.angle_max = 0.125;
    cfg.max_delay_s = 18e-9;
    cfg.seed = 2026;
    cfg.validate();
    return cfg;
}

ScenarioConfig ScenarioConfig::paper_scale() {
    ScenarioConfig cfg;
    cfg.geometry = ArrayGeometry::half_wavelength(256, 100e9);
    cfg.num_subcarriers = 1024;
    cfg.bandwidth_hz = 400e6;
    cfg.num_paths = 3;
    cfg.range_min_m = 20.0;
    cfg.range_max_m = 60.0;
    cfg.angle_min = -0.125;
    cfg.angle_max = 0.125;
    cfg.max_delay_s = 18e-9;
    cfg.seed = 2026;
    cfg.validate();
    return cfg;
}

Eigen::VectorXcd steering_vector(double sin_angle, double distance_m, const ArrayGeometry& g) {
    g.validate();
    require(distance_m > 0, "steering distance must be positive");

    const std::int64_t n = g.num_antennas;
    const double d = g.element_spacing_m;
    const double wavenumber = 2.0 * std::numbers::pi / g.wavelength_m();
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));

    Eigen::VectorXcd a(n);
    for (std::int64_t i = 0; i < n; ++i) {
        const double offset = 0.5 * static_cast<double>(2 * i - n + 1);
        // r_i - r computed without cancellation:
        // (offset^2 d^2 - 2 r offset d sin_angle) / (r_i + r).
        const double numer = offset * d * (offset * d - 2.0 * distance_m * sin_angle);
        const double r_i = std::sqrt(distance_m * distance_m + numer);
        const double diff = numer / (r_i + distance_m);
        a(i) = std::polar(norm, -wavenumber * diff);
    }
    return a;
}

Eigen::MatrixXcd synth_from_paths(const ArrayGeometry& g, std::int64_t num_subcarriers,
                                  double bandwidth_hz, const std::vector<PathRealization>& paths) {
    g.validate();
    require(num_subcarriers >= 2, "need at least 2 subcarriers");
    require(bandwidth_hz > 0, "bandwidth must be positive");
    require(!paths.empty(), "need at least one path");

    const double subcarrier_spacing = bandwidth_hz / static_cast<double>(num_subcarriers);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(g.num_antennas, num_subcarriers);
    for (const PathRealization& p : paths) {
        const Eigen::VectorXcd a = steering_vector(p.sin_angle, p.range_m, g);
        for (std::int64_t m = 0; m < num_subcarriers; ++m) {
            const double phase =
                -2.0 * std::numbers::pi * subcarrier_spacing * static_cast<double>(m) * p.delay_s;
            h.col(m) += p.gain * std::polar(1.0, phase) * a;
        }
    }
    return h;
}

std::vector<PathRealization> draw_paths(const ScenarioConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<PathRealization> paths(static_cast<std::size_t>(cfg.num_paths));
    for (std::size_t l = 0; l < paths.size(); ++l) {
        PathRealization& p = paths[l];
        p.sin_angle = rng.uniform(cfg.angle_min, cfg.angle_max);
        p.range_m = rng.uniform(cfg.range_min_m, cfg.range_max_m);
        p.delay_s = rng.uniform(0.0, cfg.max_delay_s);
        const double power = (l == 0) ? 1.0 : 0.3;
        const double sigma = std::sqrt(power / 2.0);
        p.gain = std::complex<double>(sigma * rng.normal(), sigma * rng.normal());
    }
    return paths;
}

Eigen::MatrixXcd generate_channel(const ScenarioConfig& cfg, Rng& rng) {
    const std::vector<PathRealization> paths = draw_paths(cfg, rng);
    return synth_from_paths(cfg.geometry, cfg.num_subcarriers, cfg.bandwidth_hz, paths);
}

}  // namespace vqcsi::channel
