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

#include "vqcsi/polar/polar.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "vqcsi/errors.hpp"

namespace vqcsi::polar {

TransformOperators build_operators(const channel::ArrayGeometry& geometry,
                                   std::int64_t num_subcarriers, std::int64_t num_rings,
                                   double ring_reference_m) {
    geometry.validate();
    require(num_subcarriers >= 2, "need at least 2 subcarriers");
    require(num_rings >= 1, "need at least one distance ring");
    require(ring_reference_m > 0, "ring reference distance must be positive");

    TransformOperators ops;
    ops.num_angles = geometry.num_antennas;
    ops.num_rings = num_rings;
    ops.ring_reference_m = ring_reference_m;

    const std::int64_t n = geometry.num_antennas;
    ops.polar.resize(num_rings * n, n);
    for (std::int64_t s = 1; s <= num_rings; ++s) {
        const double ring_distance = ring_reference_m / static_cast<double>(s);
        for (std::int64_t g = 0; g < n; ++g) {
            const double sin_angle = -1.0 + 2.0 * static_cast<double>(g) / static_cast<double>(n);
            ops.polar.row((s - 1) * n + g) =
                channel::steering_vector(sin_angle, ring_distance, geometry).adjoint();
        }
    }

    const std::int64_t ns = num_subcarriers;
    ops.delay.resize(ns, ns);
    const double norm = 1.0 / std::sqrt(static_cast<double>(ns));
    for (std::int64_t m = 0; m < ns; ++m) {
        for (std::int64_t k = 0; k < ns; ++k) {
            const double phase = -2.0 * std::numbers::pi * static_cast<double>(m) *
                                 static_cast<double>(k) / static_cast<double>(ns);
            ops.delay(m, k) = std::polar(norm, phase);
        }
    }
    return ops;
}

Eigen::MatrixXcd full_transform(const TransformOperators& ops, const Eigen::MatrixXcd& h) {
    require(h.rows() == ops.polar.cols(), "channel antenna count does not match the polar grid");
    require(h.cols() == ops.delay.rows(), "channel subcarrier count does not match the delay DFT");
    return ops.polar * h * ops.delay.adjoint();
}

Eigen::MatrixXcd invert_full(const TransformOperators& ops, const Eigen::MatrixXcd& s_full) {
    require(s_full.rows() == ops.polar.rows() && s_full.cols() == ops.delay.rows(),
            "full image shape does not match the operators");
    // S = P H D^H with D unitary, so H solves P H = S D in least squares.
    const Eigen::MatrixXcd rhs = s_full * ops.delay;
    return ops.polar.completeOrthogonalDecomposition().solve(rhs);
}

void SelectionMask::validate(std::int64_t grid_rows, std::int64_t num_subcarriers) const {
    for (std::size_t i = 0; i < polar_rows.size(); ++i) {
        require(polar_rows[i] >= 0 && polar_rows[i] < grid_rows, "polar row index out of range");
        require(i == 0 || polar_rows[i - 1] < polar_rows[i],
                "polar rows must be strictly increasing");
    }
    for (std::size_t i = 0; i < delay_cols.size(); ++i) {
        require(delay_cols[i] >= 0 && delay_cols[i] < num_subcarriers,
                "delay column index out of range");
        require(i == 0 || delay_cols[i - 1] < delay_cols[i],
                "delay columns must be strictly increasing");
    }
}

void save_mask(const std::string& path, const SelectionMask& mask) {
    std::ofstream out(path, std::ios::trunc);
    if (!out.good()) throw file_error("cannot open mask file for writing: " + path);
    out << "polar_rows:";
    for (const std::int64_t r : mask.polar_rows) out << ' ' << r;
    out << "\ndelay_cols:";
    for (const std::int64_t c : mask.delay_cols) out << ' ' << c;
    out << '\n';
    if (!out.good()) throw file_error("failed writing mask file: " + path);
}

SelectionMask load_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw file_error("cannot open mask file: " + path);

    SelectionMask mask;
    std::string line;
    bool saw_polar = false, saw_delay = false;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        std::vector<std::int64_t>* target = nullptr;
        if (key == "polar_rows:") {
            target = &mask.polar_rows;
            saw_polar = true;
        } else if (key == "delay_cols:") {
            target = &mask.delay_cols;
            saw_delay = true;
        } else if (key.empty()) {
            continue;
        } else {
            throw file_error("unknown key in mask file " + path + ": " + key);
        }
        std::int64_t v;
        while (ss >> v) target->push_back(v);
    }
    if (!saw_polar || !saw_delay) throw file_error("mask file missing a key: " + path);
    return mask;
}

MaskAccumulator::MaskAccumulator(const TransformOperators& ops)
    : ops_(ops), row_energy_(Eigen::VectorXd::Zero(ops.grid_rows())) {}

void MaskAccumulator::add(const Eigen::MatrixXcd& h) {
    const Eigen::MatrixXcd s = full_transform(ops_, h);
    row_energy_ += s.rowwise().squaredNorm();
    ++count_;
}

SelectionMask MaskAccumulator::finalize(std::int64_t num_polar_rows,
                                        std::int64_t num_delay_cols) const {
    require(count_ > 0, "mask selection needs at least one sample");
    require(num_polar_rows >= 1 && num_polar_rows <= ops_.grid_rows(),
            "retained polar row count out of range");
    require(num_delay_cols >= 1 && num_delay_cols <= ops_.delay.rows(),
            "retained delay column count out of range");

    std::vector<std::int64_t> order(static_cast<std::size_t>(ops_.grid_rows()));
    std::iota(order.begin(), order.end(), std::int64_t{0});
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        if (row_energy_(a) != row_energy_(b)) return row_energy_(a) > row_energy_(b);
        return a < b;
    });

    SelectionMask mask;
    mask.polar_rows.assign(order.begin(), order.begin() + num_polar_rows);
    std::sort(mask.polar_rows.begin(), mask.polar_rows.end());
    mask.delay_cols.resize(static_cast<std::size_t>(num_delay_cols));
    std::iota(mask.delay_cols.begin(), mask.delay_cols.end(), std::int64_t{0});
    mask.validate(ops_.grid_rows(), ops_.delay.rows());
    return mask;
}

SelectionMask compute_truncation_mask(const TransformOperators& ops,
                                      const std::vector<Eigen::MatrixXcd>& samples,
                                      std::int64_t num_polar_rows, std::int64_t num_delay_cols) {
    MaskAccumulator acc(ops);
    for (const Eigen::MatrixXcd& h : samples) acc.add(h);
    return acc.finalize(num_polar_rows, num_delay_cols);
}

Tensor<double> to_sparse(const TransformOperators& ops, const SelectionMask& mask,
                         const Eigen::MatrixXcd& h) {
    mask.validate(ops.grid_rows(), ops.delay.rows());
    const Eigen::MatrixXcd s = full_transform(ops, h);

    const std::int64_t np = static_cast<std::int64_t>(mask.polar_rows.size());
    const std::int64_t nd = static_cast<std::int64_t>(mask.delay_cols.size());
    Tensor<double> out({2, np, nd});
    double* re = out.data();
    double* im = out.data() + np * nd;
    for (std::int64_t i = 0; i < np; ++i) {
        for (std::int64_t j = 0; j < nd; ++j) {
            const std::complex<double> v =
                s(mask.polar_rows[static_cast<std::size_t>(i)],
                  mask.delay_cols[static_cast<std::size_t>(j)]);
            re[i * nd + j] = v.real();
            im[i * nd + j] = v.imag();
        }
    }
    return out;
}

Eigen::MatrixXcd sparse_to_full(const TransformOperators& ops, const SelectionMask& mask,
                                const Tensor<double>& sparse) {
    mask.validate(ops.grid_rows(), ops.delay.rows());
    const std::int64_t np = static_cast<std::int64_t>(mask.polar_rows.size());
    const std::int64_t nd = static_cast<std::int64_t>(mask.delay_cols.size());
    require(sparse.rank() == 3 && sparse.dim(0) == 2 && sparse.dim(1) == np &&
                sparse.dim(2) == nd,
            "sparse block shape does not match the mask");

    Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(ops.grid_rows(), ops.delay.rows());
    const double* re = sparse.data();
    const double* im = sparse.data() + np * nd;
    for (std::int64_t i = 0; i < np; ++i) {
        for (std::int64_t j = 0; j < nd; ++j) {
            full(mask.polar_rows[static_cast<std::size_t>(i)],
                 mask.delay_cols[static_cast<std::size_t>(j)]) =
                std::complex<double>(re[i * nd + j], im[i * nd + j]);
        }
    }
    return full;
}

double retained_energy(const TransformOperators& ops, const SelectionMask& mask,
                       const Eigen::MatrixXcd& h) {
    mask.validate(ops.grid_rows(), ops.delay.rows());
    const Eigen::MatrixXcd s = full_transform(ops, h);
    const double total = s.squaredNorm();
    require(total > 0, "channel has zero energy in the transform domain");

    double kept = 0;
    for (const std::int64_t r : mask.polar_rows) {
        for (const std::int64_t c : mask.delay_cols) {
            kept += std::norm(s(r, c));
        }
    }
    return kept / total;
}

}  // namespace vqcsi::polar
