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
// Experiment-level configuration: one flat key=value namespace binding the
// channel scenario, the polar-delay truncation, the network/trainer setup,
// and the evaluation protocol. Profiles ("desk", "paper") provide defaults;
// individual keys override them.

#ifndef VQCSI_HARNESS_EXPERIMENT_HPP
#define VQCSI_HARNESS_EXPERIMENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "vqcsi/channel/channel.hpp"
#include "vqcsi/io/config.hpp"
#include "vqcsi/polar/polar.hpp"
#include "vqcsi/train/trainer.hpp"

namespace vqcsi::harness {

struct ExperimentConfig {
    std::string profile = "desk";  // desk | paper

    channel::ScenarioConfig scenario;
    std::int64_t dataset_count = 0;
    std::string dataset_path = "desk.vqcs";

    std::int64_t num_rings = 3;
    std::int64_t mask_rows = 32;  // polar rows kept (N_p)
    std::int64_t mask_cols = 32;  // delay columns kept (N_d)
    std::string mask_path = "desk.mask";

    train::TrainConfig train;
    std::string checkpoint_path = "model.vqck";
    std::string metrics_path;  // per-step training metrics CSV; empty skips it

    std::vector<double> snr_list = {0.0, 5.0, 10.0, 15.0};
    std::int64_t trials = 1;
    std::int64_t eval_count = 0;  // cap on evaluated samples; 0 means the whole split
    std::string eval_split = "test";
    std::string out_path = "results.csv";
    std::string model_id;  // empty: derived from backbone/bits/seed

    std::int64_t baseline_bits = 8;
    std::string baseline_code = "hamming74";  // none | hamming74
    std::vector<std::uint64_t> ablate_seeds = {1, 2, 3};

    /// Bind a raw key=value map, starting from the named profile's defaults.
    /// Unknown keys are rejected; every value is validated.
    static ExperimentConfig from_config(const io::Config& raw);

    /// Every key from_config understands.
    static std::vector<std::string> known_keys();

    std::string derived_model_id() const;

    /// Ring reference distance for the polar grid (the scenario's far range).
    double ring_reference_m() const { return scenario.range_max_m; }

    void validate() const;
};

}  // namespace vqcsi::harness

#endif  // VQCSI_HARNESS_EXPERIMENT_HPP
