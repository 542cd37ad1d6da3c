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

#include "vqcsi/harness/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include "vqcsi/channel/dataset.hpp"
#include "vqcsi/errors.hpp"
#include "vqcsi/harness/evaluate.hpp"
#include "vqcsi/harness/experiment.hpp"
#include "vqcsi/harness/pipeline.hpp"
#include "vqcsi/io/config.hpp"
#include "vqcsi/io/csv.hpp"

namespace vqcsi::harness {

namespace {

io::CsvTable sweep_table(const std::vector<SweepPoint>& points) {
    io::CsvTable t;
    t.header = {"snr_test_db", "feedback_bits", "nmse_db", "index_error_rate", "model_id"};
    for (const SweepPoint& p : points) {
        t.rows.push_back({io::format_number(p.snr_test_db), io::format_number(p.feedback_bits),
                          io::format_number(p.nmse_db), io::format_number(p.index_error_rate),
                          p.model_id});
    }
    return t;
}

io::CsvTable ablation_table(const std::vector<AblationRow>& rows) {
    io::CsvTable t;
    t.header = {"arm",     "seed",           "snr_test_db", "feedback_bits",
                "nmse_db", "index_error_rate", "perp_bottom", "perp_top"};
    for (const AblationRow& r : rows) {
        t.rows.push_back({r.arm, io::format_number(static_cast<std::int64_t>(r.seed)),
                          io::format_number(r.point.snr_test_db),
                          io::format_number(r.point.feedback_bits),
                          io::format_number(r.point.nmse_db),
                          io::format_number(r.point.index_error_rate),
                          io::format_number(r.point.perp_bottom),
                          io::format_number(r.point.perp_top)});
    }
    return t;
}

io::CsvTable metrics_table(const std::vector<train::StepMetrics>& metrics) {
    io::CsvTable t;
    t.header = {"step",      "epoch",      "lr",       "snr_db",      "loss",     "mse",
                "vq_bottom", "vq_top",     "ent_bottom", "ent_top",   "perp_bottom", "perp_top"};
    for (const train::StepMetrics& m : metrics) {
        t.rows.push_back({io::format_number(m.step), io::format_number(m.epoch),
                          io::format_number(m.lr), io::format_number(m.snr_db),
                          io::format_number(m.loss), io::format_number(m.mse),
                          io::format_number(m.vq_bottom), io::format_number(m.vq_top),
                          io::format_number(m.ent_bottom), io::format_number(m.ent_top),
                          io::format_number(m.perp_bottom), io::format_number(m.perp_top)});
    }
    return t;
}

void write_table(const std::string& path, const io::CsvTable& t) {
    io::write_csv(path, t.header, t.rows);
}

int cmd_generate(const ExperimentConfig& cfg, std::ostream& out) {
    channel::generate_dataset(cfg.scenario, cfg.dataset_count, cfg.dataset_path);
    out << "wrote " << cfg.dataset_path << ": " << cfg.dataset_count << " channels ("
        << cfg.scenario.geometry.num_antennas << " antennas x " << cfg.scenario.num_subcarriers
        << " subcarriers)\n";
    return 0;
}

int cmd_mask(const ExperimentConfig& cfg, std::ostream& out) {
    const auto ops = build_transform(cfg);
    const auto mask = compute_mask(cfg, ops);
    polar::save_mask(cfg.mask_path, mask);
    const double kept = mask_energy_fraction(cfg, ops, mask);
    out << "wrote " << cfg.mask_path << ": " << cfg.mask_rows << " x " << cfg.mask_cols
        << " cells keep " << io::format_number(kept * 100.0) << "% of training energy\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
    const auto ops = build_transform(cfg);
    const auto mask = polar::load_mask(cfg.mask_path);
    const SparseSplits splits = prepare_sparse_splits(cfg, ops, mask);

    const train::TrainResult<double> result = train::train(cfg.train, splits.train);
    train::save_model_checkpoint(cfg.checkpoint_path, result.model, result.adam);
    if (!cfg.metrics_path.empty()) {
        write_table(cfg.metrics_path, metrics_table(result.metrics));
        out << "wrote " << cfg.metrics_path << ": " << result.metrics.size() << " step rows\n";
    }
    out << "wrote " << cfg.checkpoint_path << ": " << result.metrics.size()
        << " steps, final loss " << io::format_number(result.metrics.back().loss) << ", payload "
        << result.model.payload_bits() << " bits/sample\n";
    return 0;
}

/// Shared tail of eval/sweep: restore, evaluate, write the results table.
int run_model_eval(const ExperimentConfig& cfg, bool through_channel, std::ostream& out) {
    const auto ops = build_transform(cfg);
    const auto mask = polar::load_mask(cfg.mask_path);

    auto model = train::make_model<double>(cfg.train);
    grad::Adam<double> adam;
    train::restore_model_checkpoint(cfg.checkpoint_path, model, adam);

    const SparseSplits splits = prepare_sparse_splits(cfg, ops, mask);
    const Tensor<double> samples = take_rows(splits.by_name(cfg.eval_split), cfg.eval_count);
    const std::string model_id =
        cfg.model_id.empty() ? cfg.derived_model_id() : cfg.model_id;

    const auto points = evaluate_sweep(model, samples, cfg.snr_list,
                                       through_channel ? cfg.trials : 1, through_channel,
                                       cfg.train.seed, model_id, cfg.train.batch_size);
    write_table(cfg.out_path, sweep_table(points));
    out << "wrote " << cfg.out_path << ": " << points.size() << " rows over " << samples.dim(0)
        << " " << cfg.eval_split << " samples"
        << (through_channel ? "" : " (channel-free)") << "\n";
    return 0;
}

int cmd_ablate(const ExperimentConfig& cfg, std::ostream& out) {
    const auto ops = build_transform(cfg);
    const auto mask = polar::load_mask(cfg.mask_path);
    const SparseSplits splits = prepare_sparse_splits(cfg, ops, mask);
    const Tensor<double> samples = take_rows(splits.by_name(cfg.eval_split), cfg.eval_count);

    const auto rows = run_ablation(cfg, splits.train, samples);
    write_table(cfg.out_path, ablation_table(rows));
    out << "wrote " << cfg.out_path << ": " << rows.size() << " rows ("
        << ablation_arms(cfg.train.lambda2).size() << " arms x " << cfg.ablate_seeds.size()
        << " seeds x " << cfg.snr_list.size() << " snr points)\n";
    return 0;
}

int cmd_baseline(const ExperimentConfig& cfg, std::ostream& out) {
    const auto ops = build_transform(cfg);
    const auto mask = polar::load_mask(cfg.mask_path);
    const SparseSplits splits = prepare_sparse_splits(cfg, ops, mask);
    const Tensor<double> samples = take_rows(splits.by_name(cfg.eval_split), cfg.eval_count);

    const auto points = sscc_baseline(samples, cfg.snr_list, cfg.baseline_bits,
                                      cfg.baseline_code == "hamming74", cfg.trials,
                                      cfg.train.seed);
    write_table(cfg.out_path, sweep_table(points));
    out << "wrote " << cfg.out_path << ": " << points.size() << " rows, "
        << points.front().feedback_bits << " channel bits/sample\n";
    return 0;
}

/// Split a "B,T" bit profile into its two integer fields.
void apply_bits_profile(io::Config& raw, const std::string& profile) {
    const auto comma = profile.find(',');
    if (comma == std::string::npos || profile.find(',', comma + 1) != std::string::npos) {
        throw config_error("--bits-profile expects 'BOTTOM,TOP', got '" + profile + "'");
    }
    raw.set("bottom_bits", profile.substr(0, comma));
    raw.set("top_bits", profile.substr(comma + 1));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"vqcsi: digital CSI feedback simulation for near-field XL-MIMO links"};
    app.fallthrough(true);
    app.require_subcommand(1);

    std::string config_path, seed, snr_list, bits_profile, backbone, out_path;
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--seed", seed, "training / evaluation seed");
    app.add_option("--snr-list", snr_list, "comma-separated test SNRs in dB");
    app.add_option("--bits-profile", bits_profile, "codebook bits as 'BOTTOM,TOP'");
    app.add_option("--backbone", backbone, "network backbone (cnn | transformer)");
    app.add_option("--out", out_path, "results CSV path");

    CLI::App* sub_generate =
        app.add_subcommand("generate", "synthesize a channel dataset file");
    CLI::App* sub_mask =
        app.add_subcommand("mask", "compute the truncation mask from the training split");
    CLI::App* sub_train = app.add_subcommand("train", "train a model and write a checkpoint");
    CLI::App* sub_eval =
        app.add_subcommand("eval", "channel-free reconstruction quality of a checkpoint");
    CLI::App* sub_sweep =
        app.add_subcommand("sweep", "digital-pipeline evaluation across test SNRs");
    CLI::App* sub_ablate =
        app.add_subcommand("ablate", "train and compare the codebook-update arms");
    CLI::App* sub_baseline =
        app.add_subcommand("baseline", "scalar-quantizer feedback baseline sweep");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        io::Config raw =
            config_path.empty() ? io::Config{} : io::Config::from_file(config_path);
        raw.merge_env();
        if (!seed.empty()) raw.set("seed", seed);
        if (!snr_list.empty()) raw.set("snr_list", snr_list);
        if (!bits_profile.empty()) apply_bits_profile(raw, bits_profile);
        if (!backbone.empty()) raw.set("backbone", backbone);
        if (!out_path.empty()) raw.set("out", out_path);
        const ExperimentConfig cfg = ExperimentConfig::from_config(raw);

        if (sub_generate->parsed()) return cmd_generate(cfg, out);
        if (sub_mask->parsed()) return cmd_mask(cfg, out);
        if (sub_train->parsed()) return cmd_train(cfg, out);
        if (sub_eval->parsed()) return run_model_eval(cfg, false, out);
        if (sub_sweep->parsed()) return run_model_eval(cfg, true, out);
        if (sub_ablate->parsed()) return cmd_ablate(cfg, out);
        if (sub_baseline->parsed()) return cmd_baseline(cfg, out);
        err << "error: no subcommand dispatched\n";
        return 2;
    } catch (const config_error& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace vqcsi::harness
