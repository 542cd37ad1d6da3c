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
// Flat key=value experiment configuration with layered precedence:
// config file < environment overrides < explicit (command-line) overrides.

#ifndef VQCSI_IO_CONFIG_HPP
#define VQCSI_IO_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vqcsi::io {

/// Key-value map of experiment settings. Keys are lowercase words joined by
/// underscores or dots. Later assignments overwrite earlier ones, so the
/// caller applies the layers in precedence order: file, then merge_env, then
/// set for each command-line override.
class Config {
  public:
    Config() = default;

    /// Parse a config file. Lines are `key = value`; blank lines and lines
    /// starting with `#` are skipped; whitespace around key and value is
    /// trimmed. A later line overwrites an earlier one.
    static Config from_file(const std::string& path);

    /// Same grammar, from an in-memory string. `origin` names the source in
    /// diagnostics.
    static Config from_text(const std::string& text, const std::string& origin = "<text>");

    /// Overwrite one key (highest-precedence layer).
    void set(const std::string& key, const std::string& value);

    /// Apply every environment variable `<prefix><KEY>` (key uppercased,
    /// dots mapped to underscores) as an override of `key`.
    void merge_env(const std::string& prefix = "VQCSI_");

    bool has(const std::string& key) const;

    /// Typed getters. The no-default forms throw config_error when the key
    /// is absent; every form throws config_error on an unparseable value.
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;

    /// Comma-separated list of numbers, e.g. "0,5,10,15".
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;

    /// Reject any key outside `allowed` (typo guard); throws config_error
    /// naming the offending key.
    void require_known(const std::vector<std::string>& allowed) const;

    /// All keys in sorted order.
    std::vector<std::string> keys() const;

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace vqcsi::io

#endif  // VQCSI_IO_CONFIG_HPP
