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

#include "vqcsi/harness/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "vqcsi/channel/dataset.hpp"
#include "vqcsi/errors.hpp"
#include "vqcsi/link/link.hpp"
#include "vqcsi/rng.hpp"

namespace vqcsi::harness {

polar::TransformOperators build_transform(const ExperimentConfig& cfg) {
    return polar::build_operators(cfg.scenario.geometry, cfg.scenario.num_subcarriers,
                                  cfg.num_rings, cfg.ring_reference_m());
}

polar::SelectionMask compute_mask(const ExperimentConfig& cfg,
                                  const polar::TransformOperators& ops) {
    channel::DatasetReader reader(cfg.dataset_path);
    const auto split = channel::split_indices(reader.header().count, reader.header().seed);
    std::vector<bool> in_train(static_cast<std::size_t>(reader.header().count), false);
    for (const std::int64_t i : split.train) in_train[static_cast<std::size_t>(i)] = true;

    polar::MaskAccumulator acc(ops);
    Eigen::MatrixXcd h;
    std::int64_t index = 0;
    while (reader.next(h)) {
        if (in_train[static_cast<std::size_t>(index)]) acc.add(h);
        ++index;
    }
    return acc.finalize(cfg.mask_rows, cfg.mask_cols);
}

double mask_energy_fraction(const ExperimentConfig& cfg, const polar::TransformOperators& ops,
                            const polar::SelectionMask& mask) {
    mask.validate(ops.grid_rows(), cfg.scenario.num_subcarriers);
    channel::DatasetReader reader(cfg.dataset_path);
    const auto split = channel::split_indices(reader.header().count, reader.header().seed);
    std::vector<bool> in_train(static_cast<std::size_t>(reader.header().count), false);
    for (const std::int64_t i : split.train) in_train[static_cast<std::size_t>(i)] = true;

    double kept = 0, total = 0;
    Eigen::MatrixXcd h;
    std::int64_t index = 0;
    while (reader.next(h)) {
        if (in_train[static_cast<std::size_t>(index++)]) {
            const Eigen::MatrixXcd s = polar::full_transform(ops, h);
            total += s.squaredNorm();
            for (const std::int64_t r : mask.polar_rows) {
                for (const std::int64_t c : mask.delay_cols) kept += std::norm(s(r, c));
            }
        }
    }
    require(total > 0, "mask energy: training split carries no energy");
    return kept / total;
}

namespace {

Tensor<double> gather_sparse(const polar::TransformOperators& ops,
                             const polar::SelectionMask& mask,
                             const std::vector<Eigen::MatrixXcd>& samples,
                             const std::vector<std::int64_t>& indices) {
    const std::int64_t np = static_cast<std::int64_t>(mask.polar_rows.size());
    const std::int64_t nd = static_cast<std::int64_t>(mask.delay_cols.size());
    Tensor<double> out({static_cast<std::int64_t>(indices.size()), 2, np, nd});
    const std::int64_t stride = 2 * np * nd;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Tensor<double> sparse =
            polar::to_sparse(ops, mask, samples[static_cast<std::size_t>(indices[k])]);
        std::copy(sparse.data(), sparse.data() + stride,
                  out.data() + static_cast<std::int64_t>(k) * stride);
    }
    return out;
}

}  // namespace

const Tensor<double>& SparseSplits::by_name(const std::string& name) const {
    if (name == "train") return train;
    if (name == "test") return test;
    if (name == "val") return val;
    throw contract_error("unknown split '" + name + "' (expected train|test|val)");
}

SparseSplits prepare_sparse_splits(const ExperimentConfig& cfg,
                                   const polar::TransformOperators& ops,
                                   const polar::SelectionMask& mask) {
    mask.validate(ops.grid_rows(), cfg.scenario.num_subcarriers);
    channel::DatasetHeader header;
    const std::vector<Eigen::MatrixXcd> samples = channel::load_dataset(cfg.dataset_path, &header);
    require(header.num_antennas == cfg.scenario.geometry.num_antennas &&
                header.num_subcarriers == cfg.scenario.num_subcarriers,
            "dataset dimensions do not match the configured scenario");
    const auto split = channel::split_indices(header.count, header.seed);

    SparseSplits out;
    out.train = gather_sparse(ops, mask, samples, split.train);
    out.test = gather_sparse(ops, mask, samples, split.test);
    out.val = gather_sparse(ops, mask, samples, split.val);
    return out;
}

Tensor<double> take_rows(const Tensor<double>& samples, std::int64_t count) {
    require(samples.rank() >= 1, "take_rows: need a sample axis");
    if (count <= 0 || count >= samples.dim(0)) return samples;
    std::vector<std::int64_t> shape(samples.shape().begin(), samples.shape().end());
    shape[0] = count;
    Tensor<double> out(shape);
    std::copy(samples.data(), samples.data() + out.numel(), out.data());
    return out;
}

double sscc_quantizer_distortion(const Tensor<double>& samples, std::int64_t quant_bits) {
    require(quant_bits >= 1 && quant_bits <= 16, "baseline: quant bits outside [1,16]");
    require(samples.rank() == 4 && samples.dim(0) >= 1, "baseline: need [n,2,h,w] samples");

    double peak = 0;
    for (std::int64_t i = 0; i < samples.numel(); ++i) peak = std::max(peak, std::abs(samples[i]));
    require(peak > 0, "baseline: all-zero sample set");

    const std::int64_t levels = std::int64_t{1} << quant_bits;
    const double step = 2.0 * peak / static_cast<double>(levels);
    const std::int64_t per_sample = samples.numel() / samples.dim(0);

    double err_acc = 0, norm_acc = 0;
    std::vector<double> ratios;
    for (std::int64_t s = 0; s < samples.dim(0); ++s) {
        err_acc = norm_acc = 0;
        for (std::int64_t i = 0; i < per_sample; ++i) {
            const double v = samples[s * per_sample + i];
            auto code = static_cast<std::int64_t>(std::floor((v + peak) / step));
            code = std::clamp<std::int64_t>(code, 0, levels - 1);
            const double recon = -peak + (static_cast<double>(code) + 0.5) * step;
            err_acc += (v - recon) * (v - recon);
            norm_acc += v * v;
        }
        require(norm_acc > 0, "baseline: zero-norm sample");
        ratios.push_back(err_acc / norm_acc);
    }
    double mean = 0;
    for (const double r : ratios) mean += r;
    return mean / static_cast<double>(ratios.size());
}

std::vector<SweepPoint> sscc_baseline(const Tensor<double>& samples,
                                      const std::vector<double>& snr_list,
                                      std::int64_t quant_bits, bool hamming74,
                                      std::int64_t trials, std::uint64_t seed) {
    require(quant_bits >= 1 && quant_bits <= 16, "baseline: quant bits outside [1,16]");
    require(samples.rank() == 4 && samples.dim(0) >= 1, "baseline: need [n,2,h,w] samples");
    require(trials >= 1, "baseline: need at least one trial");

    double peak = 0;
    for (std::int64_t i = 0; i < samples.numel(); ++i) peak = std::max(peak, std::abs(samples[i]));
    require(peak > 0, "baseline: all-zero sample set");

    const std::int64_t levels = std::int64_t{1} << quant_bits;
    const double step = 2.0 * peak / static_cast<double>(levels);
    const std::int64_t n = samples.dim(0);
    const std::int64_t per_sample = samples.numel() / n;
    const std::int64_t payload_bits = per_sample * quant_bits;
    const std::int64_t channel_bits = hamming74 ? payload_bits / 4 * 7 : payload_bits;
    const std::string model_id = std::string("sscc_b") + std::to_string(quant_bits) +
                                 (hamming74 ? "_hamming74" : "_none");
    if (hamming74) {
        require(payload_bits % 4 == 0, "baseline: payload bits must group into 4-bit blocks");
    }

    // per-sample quantizer codes, computed once
    std::vector<std::vector<std::uint32_t>> codes(static_cast<std::size_t>(n));
    for (std::int64_t s = 0; s < n; ++s) {
        auto& cs = codes[static_cast<std::size_t>(s)];
        cs.resize(static_cast<std::size_t>(per_sample));
        for (std::int64_t i = 0; i < per_sample; ++i) {
            const double v = samples[s * per_sample + i];
            auto code = static_cast<std::int64_t>(std::floor((v + peak) / step));
            cs[static_cast<std::size_t>(i)] =
                static_cast<std::uint32_t>(std::clamp<std::int64_t>(code, 0, levels - 1));
        }
    }

    const Rng root(seed);
    std::vector<SweepPoint> points;
    for (std::size_t pi = 0; pi < snr_list.size(); ++pi) {
        Rng stream = root.substream("baseline", pi);
        link::LinkConfig link_cfg;
        link_cfg.snr_db = snr_list[pi];
        link_cfg.hamming74 = hamming74;

        std::vector<double> ratios;
        std::int64_t wrong = 0, total = 0;
        for (std::int64_t s = 0; s < n; ++s) {
            const auto& cs = codes[static_cast<std::size_t>(s)];
            for (std::int64_t t = 0; t < trials; ++t) {
                const auto rx =
                    link::transmit_indices(cs, static_cast<int>(quant_bits), link_cfg, stream);
                double err_acc = 0, norm_acc = 0;
                for (std::int64_t i = 0; i < per_sample; ++i) {
                    wrong += rx[static_cast<std::size_t>(i)] != cs[static_cast<std::size_t>(i)];
                    const double v = samples[s * per_sample + i];
                    const double recon =
                        -peak + (static_cast<double>(rx[static_cast<std::size_t>(i)]) + 0.5) * step;
                    err_acc += (v - recon) * (v - recon);
                    norm_acc += v * v;
                }
                total += per_sample;
                ratios.push_back(err_acc / norm_acc);
            }
        }

        SweepPoint p;
        p.snr_test_db = snr_list[pi];
        p.feedback_bits = channel_bits;
        p.nmse_db = nmse_db_from_ratios(ratios);
        p.index_error_rate = static_cast<double>(wrong) / static_cast<double>(total);
        p.model_id = model_id;
        points.push_back(std::move(p));
    }
    sort_sweep(points);
    return points;
}

}  // namespace vqcsi::harness
