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

#include "vqcsi/channel/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <limits>
#include <numeric>

#include "vqcsi/errors.hpp"
#include "vqcsi/rng.hpp"

namespace vqcsi::channel {

static_assert(std::endian::native == std::endian::little,
              "dataset files are little-endian; byte-swapping I/O is not implemented");

namespace {

constexpr char kMagic[4] = {'V', 'Q', 'C', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::int64_t kMaxPlausibleDim = 1 << 20;

void require_file(bool ok, const std::string& msg) {
    if (!ok) throw file_error(msg);
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    require_file(in.gcount() == static_cast<std::streamsize>(sizeof(T)),
                 "truncated dataset file: " + path);
}

std::int64_t sample_floats(const DatasetHeader& h) {
    return h.num_antennas * h.num_subcarriers * 2;
}

Eigen::MatrixXcd regenerate_sample(const ScenarioConfig& cfg, Rng& root, std::int64_t index) {
    Rng stream = root.substream("sample", static_cast<std::uint64_t>(index));
    return generate_channel(cfg, stream);
}

}  // namespace

SplitIndices split_indices(std::int64_t count, std::uint64_t seed) {
    require(count >= 2, "dataset split needs at least 2 samples");
    std::vector<std::int64_t> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), std::int64_t{0});

    Rng root(seed);
    Rng shuffle_rng = root.substream("split", 0);
    for (std::int64_t i = count - 1; i > 0; --i) {
        const std::int64_t j =
            static_cast<std::int64_t>(shuffle_rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    const std::int64_t n_train = (10 * count) / 15;
    const std::int64_t n_test = (3 * count) / 15;
    SplitIndices split;
    split.train.assign(order.begin(), order.begin() + n_train);
    split.test.assign(order.begin() + n_train, order.begin() + n_train + n_test);
    split.val.assign(order.begin() + n_train + n_test, order.end());
    return split;
}

void generate_dataset(const ScenarioConfig& cfg, std::int64_t count, const std::string& path) {
    cfg.validate();
    require(count >= 2, "dataset needs at least 2 samples");

    Rng root(cfg.seed);
    const SplitIndices split = split_indices(count, cfg.seed);
    require(!split.train.empty(), "dataset too small for a non-empty training split");

    // Pass 1: peak modulus over the raw training split fixes the scale.
    double scale = 0;
    for (const std::int64_t i : split.train) {
        const Eigen::MatrixXcd h = regenerate_sample(cfg, root, i);
        scale = std::max(scale, h.cwiseAbs().maxCoeff());
    }
    require(scale > 0, "training split has zero energy");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require_file(out.good(), "cannot open dataset file for writing: " + path);

    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(cfg.geometry.num_antennas));
    write_pod(out, static_cast<std::uint32_t>(cfg.num_subcarriers));
    write_pod(out, static_cast<std::uint64_t>(count));
    write_pod(out, scale);
    write_pod(out, cfg.seed);

    // Pass 2: normalized samples, antenna-major, interleaved re/im float32.
    std::vector<float> buf(static_cast<std::size_t>(cfg.geometry.num_antennas *
                                                    cfg.num_subcarriers * 2));
    for (std::int64_t i = 0; i < count; ++i) {
        const Eigen::MatrixXcd h = regenerate_sample(cfg, root, i);
        std::size_t k = 0;
        for (std::int64_t r = 0; r < h.rows(); ++r) {
            for (std::int64_t c = 0; c < h.cols(); ++c) {
                const std::complex<double> v = h(r, c) / scale;
                buf[k++] = static_cast<float>(v.real());
                buf[k++] = static_cast<float>(v.imag());
            }
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    require_file(out.good(), "failed writing dataset file: " + path);
}

DatasetReader::DatasetReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
    require_file(in_.good(), "cannot open dataset file: " + path);

    char magic[4];
    in_.read(magic, sizeof(magic));
    require_file(in_.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0,
                 "not a channel dataset file: " + path);

    read_pod(in_, header_.version, path_);
    require_file(header_.version == kVersion, "unsupported dataset version in " + path);

    std::uint32_t n = 0, ns = 0;
    std::uint64_t count = 0;
    read_pod(in_, n, path_);
    read_pod(in_, ns, path_);
    read_pod(in_, count, path_);
    read_pod(in_, header_.scale, path_);
    read_pod(in_, header_.seed, path_);
    header_.num_antennas = static_cast<std::int64_t>(n);
    header_.num_subcarriers = static_cast<std::int64_t>(ns);
    header_.count = static_cast<std::int64_t>(count);

    require_file(header_.num_antennas >= 1 && header_.num_antennas <= kMaxPlausibleDim &&
                     header_.num_subcarriers >= 1 && header_.num_subcarriers <= kMaxPlausibleDim &&
                     header_.count >= 0 && std::isfinite(header_.scale) && header_.scale > 0,
                 "implausible dataset header in " + path);

    payload_start_ = in_.tellg();

    in_.seekg(0, std::ios::end);
    const std::streamoff file_size = in_.tellg();
    const std::streamoff expected =
        static_cast<std::streamoff>(payload_start_) +
        static_cast<std::streamoff>(header_.count * sample_floats(header_) *
                                    static_cast<std::int64_t>(sizeof(float)));
    require_file(file_size == expected, "truncated dataset file: " + path);

    reset();
}

void DatasetReader::reset() {
    in_.clear();
    in_.seekg(payload_start_);
    cursor_ = 0;
}

bool DatasetReader::next(Eigen::MatrixXcd& out) {
    if (cursor_ >= header_.count) return false;

    std::vector<float> buf(static_cast<std::size_t>(sample_floats(header_)));
    in_.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    require_file(in_.gcount() == static_cast<std::streamsize>(buf.size() * sizeof(float)),
                 "truncated dataset file: " + path_);

    out.resize(header_.num_antennas, header_.num_subcarriers);
    std::size_t k = 0;
    for (std::int64_t r = 0; r < out.rows(); ++r) {
        for (std::int64_t c = 0; c < out.cols(); ++c) {
            const float re = buf[k++];
            const float im = buf[k++];
            out(r, c) = std::complex<double>(re, im);
        }
    }
    ++cursor_;
    return true;
}

std::vector<Eigen::MatrixXcd> load_dataset(const std::string& path, DatasetHeader* header) {
    DatasetReader reader(path);
    if (header != nullptr) *header = reader.header();
    std::vector<Eigen::MatrixXcd> samples;
    samples.reserve(static_cast<std::size_t>(reader.header().count));
    Eigen::MatrixXcd h;
    while (reader.next(h)) samples.push_back(h);
    return samples;
}

}  // namespace vqcsi::channel
