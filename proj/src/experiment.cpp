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

#include "vqcsi/harness/experiment.hpp"

#include <cmath>

#include "vqcsi/errors.hpp"

namespace vqcsi::harness {

namespace {

/// Every config value problem surfaces as a config_error, including range
/// violations detected by the module-level validate() contracts.
template <typename Fn>
void as_config_error(Fn&& fn) {
    try {
        fn();
    } catch (const contract_error& e) {
        throw config_error(e.what());
    }
}

std::int64_t positive(const io::Config& raw, const std::string& key, std::int64_t fallback) {
    const std::int64_t v = raw.get_int(key, fallback);
    if (v <= 0) throw config_error("config key '" + key + "' must be positive");
    return v;
}

}  // namespace

std::vector<std::string> ExperimentConfig::known_keys() {
    return {
        "profile",        "backbone",
        // scenario
        "num_antennas",   "num_subcarriers", "carrier_freq_hz", "bandwidth_hz",
        "num_paths",      "range_min_m",     "range_max_m",     "angle_min",
        "angle_max",      "max_delay_s",     "dataset_seed",    "dataset_count",
        "dataset_path",
        // transform / truncation
        "num_rings",      "mask_rows",       "mask_cols",       "mask_path",
        // network
        "latent_dim",     "width",           "d_model",         "num_heads",
        "num_blocks",     "mlp_ratio",       "bottom_h",        "bottom_w",
        // trainer
        "bottom_bits",    "top_bits",        "codebook_update", "epochs",
        "batch_size",     "lr0",             "lambda1",         "lambda2",
        "beta",           "rho",             "snr_lo_db",       "snr_hi_db",
        "corrupt_training", "seed",          "checkpoint_path", "metrics_path",
        // evaluation
        "snr_list",       "trials",          "eval_count",      "eval_split",
        "out",            "model_id",
        // baseline and ablation
        "baseline_bits",  "baseline_code",   "ablate_seeds",
    };
}

ExperimentConfig ExperimentConfig::from_config(const io::Config& raw) {
    raw.require_known(known_keys());

    ExperimentConfig cfg;
    cfg.profile = raw.get_string("profile", "desk");
    const bool paper = cfg.profile == "paper";
    if (!paper && cfg.profile != "desk") {
        throw config_error("unknown profile '" + cfg.profile + "' (expected desk|paper)");
    }

    const std::string backbone_name = raw.get_string("backbone", "cnn");
    nets::Backbone backbone{};
    as_config_error([&] { backbone = nets::backbone_from_string(backbone_name); });

    cfg.scenario = paper ? channel::ScenarioConfig::paper_scale()
                         : channel::ScenarioConfig::desk_default();
    if (backbone == nets::Backbone::kCnn) {
        cfg.train.net = paper ? nets::NetConfig::paper_cnn() : nets::NetConfig::desk_cnn();
    } else {
        cfg.train.net =
            paper ? nets::NetConfig::paper_transformer() : nets::NetConfig::desk_transformer();
    }

    // scenario overrides
    auto& sc = cfg.scenario;
    const std::int64_t num_antennas = positive(raw, "num_antennas", sc.geometry.num_antennas);
    const double carrier = raw.get_double("carrier_freq_hz", sc.geometry.carrier_freq_hz);
    as_config_error(
        [&] { sc.geometry = channel::ArrayGeometry::half_wavelength(num_antennas, carrier); });
    sc.num_subcarriers = positive(raw, "num_subcarriers", sc.num_subcarriers);
    sc.bandwidth_hz = raw.get_double("bandwidth_hz", sc.bandwidth_hz);
    sc.num_paths = positive(raw, "num_paths", sc.num_paths);
    sc.range_min_m = raw.get_double("range_min_m", sc.range_min_m);
    sc.range_max_m = raw.get_double("range_max_m", sc.range_max_m);
    sc.angle_min = raw.get_double("angle_min", sc.angle_min);
    sc.angle_max = raw.get_double("angle_max", sc.angle_max);
    sc.max_delay_s = raw.get_double("max_delay_s", sc.max_delay_s);
    sc.seed = raw.get_uint("dataset_seed", sc.seed);

    cfg.dataset_count = positive(raw, "dataset_count", paper ? 150000 : 4000);
    cfg.dataset_path = raw.get_string("dataset_path", paper ? "paper.vqcs" : "desk.vqcs");

    cfg.num_rings = positive(raw, "num_rings", cfg.num_rings);
    cfg.mask_rows = positive(raw, "mask_rows", cfg.mask_rows);
    cfg.mask_cols = positive(raw, "mask_cols", cfg.mask_cols);
    cfg.mask_path = raw.get_string("mask_path", paper ? "paper.mask" : "desk.mask");

    // network overrides; the input block is always the masked sparse shape
    auto& net = cfg.train.net;
    net.input_h = cfg.mask_rows;
    net.input_w = cfg.mask_cols;
    net.latent_dim = positive(raw, "latent_dim", net.latent_dim);
    net.width = positive(raw, "width", net.width);
    net.d_model = positive(raw, "d_model", net.d_model);
    net.num_heads = positive(raw, "num_heads", net.num_heads);
    net.num_blocks = positive(raw, "num_blocks", net.num_blocks);
    net.mlp_ratio = positive(raw, "mlp_ratio", net.mlp_ratio);
    net.bottom_h = positive(raw, "bottom_h", net.bottom_h);
    net.bottom_w = positive(raw, "bottom_w", net.bottom_w);

    // trainer overrides
    auto& tr = cfg.train;
    tr.bits.bottom_bits = positive(raw, "bottom_bits", tr.bits.bottom_bits);
    tr.bits.top_bits = positive(raw, "top_bits", tr.bits.top_bits);
    as_config_error([&] {
        tr.codebook_update = train::codebook_update_from_string(
            raw.get_string("codebook_update", to_string(tr.codebook_update)));
    });
    tr.epochs = positive(raw, "epochs", paper ? 100 : tr.epochs);
    tr.batch_size = positive(raw, "batch_size", paper ? 100 : tr.batch_size);
    tr.lr0 = raw.get_double("lr0", paper ? 2e-4 : tr.lr0);
    tr.lambda1 = raw.get_double("lambda1", tr.lambda1);
    tr.lambda2 = raw.get_double("lambda2", tr.lambda2);
    tr.beta = raw.get_double("beta", tr.beta);
    tr.rho = raw.get_double("rho", tr.rho);
    tr.snr_lo_db = raw.get_double("snr_lo_db", tr.snr_lo_db);
    tr.snr_hi_db = raw.get_double("snr_hi_db", tr.snr_hi_db);
    tr.corrupt_training = raw.get_bool("corrupt_training", tr.corrupt_training);
    tr.seed = raw.get_uint("seed", tr.seed);

    cfg.checkpoint_path = raw.get_string("checkpoint_path", "model.vqck");
    cfg.metrics_path = raw.get_string("metrics_path", "");

    cfg.snr_list = raw.get_double_list("snr_list", cfg.snr_list);
    cfg.trials = positive(raw, "trials", cfg.trials);
    cfg.eval_count = raw.get_int("eval_count", 0);
    cfg.eval_split = raw.get_string("eval_split", "test");
    cfg.out_path = raw.get_string("out", "results.csv");
    cfg.model_id = raw.get_string("model_id", "");

    cfg.baseline_bits = positive(raw, "baseline_bits", cfg.baseline_bits);
    cfg.baseline_code = raw.get_string("baseline_code", "hamming74");
    if (raw.has("ablate_seeds")) {
        cfg.ablate_seeds.clear();
        for (const double v : raw.get_double_list("ablate_seeds")) {
            if (v < 0 || v != std::floor(v)) {
                throw config_error("ablate_seeds must be non-negative integers");
            }
            cfg.ablate_seeds.push_back(static_cast<std::uint64_t>(v));
        }
    }

    cfg.validate();
    return cfg;
}

std::string ExperimentConfig::derived_model_id() const {
    return nets::to_string(train.net.backbone) + "_b" + std::to_string(train.bits.bottom_bits) +
           "t" + std::to_string(train.bits.top_bits) + "_s" + std::to_string(train.seed);
}

void ExperimentConfig::validate() const {
    as_config_error([&] {
        scenario.validate();
        train.validate();
    });
    if (mask_rows > scenario.geometry.num_antennas * num_rings) {
        throw config_error("mask_rows exceeds the polar grid size");
    }
    if (mask_cols > scenario.num_subcarriers) {
        throw config_error("mask_cols exceeds the subcarrier count");
    }
    if (train.net.input_h != mask_rows || train.net.input_w != mask_cols) {
        throw config_error("network input block must match the mask shape");
    }
    if (eval_split != "train" && eval_split != "test" && eval_split != "val") {
        throw config_error("eval_split must be train|test|val");
    }
    if (baseline_code != "none" && baseline_code != "hamming74") {
        throw config_error("baseline_code must be none|hamming74");
    }
    if (baseline_bits < 1 || baseline_bits > 16) {
        throw config_error("baseline_bits must lie in [1,16]");
    }
    if (eval_count < 0) throw config_error("eval_count must be non-negative");
    if (snr_list.empty()) throw config_error("snr_list must not be empty");
    if (ablate_seeds.empty()) throw config_error("ablate_seeds must not be empty");
    if (dataset_count < 15) {
        throw config_error("dataset_count must allow a 10:3:2 split (at least 15)");
    }
}

}  // namespace vqcsi::harness
