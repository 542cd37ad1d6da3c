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
// On-disk channel datasets: float32 complex samples under a fixed binary
// header, normalized by the peak modulus of the training split.

#ifndef VQCSI_CHANNEL_DATASET_HPP
#define VQCSI_CHANNEL_DATASET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "vqcsi/channel/channel.hpp"

namespace vqcsi::channel {

struct DatasetHeader {
    std::uint32_t version = 0;
    std::int64_t num_antennas = 0;
    std::int64_t num_subcarriers = 0;
    std::int64_t count = 0;
    double scale = 0;  // peak |entry| of the raw training split; payload is divided by it
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::int64_t> train;
    std::vector<std::int64_t> test;
    std::vector<std::int64_t> val;
};

/// Deterministic 10:3:2 train/test/val split of [0, count) keyed by seed.
SplitIndices split_indices(std::int64_t count, std::uint64_t seed);

/// Synthesize `count` channel samples and write them to `path`.
/// Sample i depends only on (cfg, i), so regeneration is byte-identical.
void generate_dataset(const ScenarioConfig& cfg, std::int64_t count, const std::string& path);

/// Streaming reader over a dataset file. Samples come back denormalized
/// lazily: values are as stored (divided by header().scale).
class DatasetReader {
  public:
    explicit DatasetReader(const std::string& path);

    const DatasetHeader& header() const { return header_; }

    /// Reads the next sample into `out` (resized to N x N_s). Returns false
    /// when all samples were consumed; throws file_error on truncation.
    bool next(Eigen::MatrixXcd& out);

    /// Rewind to the first sample.
    void reset();

  private:
    std::ifstream in_;
    std::string path_;
    DatasetHeader header_;
    std::int64_t cursor_ = 0;
    std::streampos payload_start_;
};

/// Convenience loader for small files; returns every sample.
std::vector<Eigen::MatrixXcd> load_dataset(const std::string& path, DatasetHeader* header = nullptr);

}  // namespace vqcsi::channel

#endif  // VQCSI_CHANNEL_DATASET_HPP
