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

#include "vqcsi/io/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vqcsi/errors.hpp"

extern char** environ;

namespace vqcsi::io {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool valid_key(const std::string& key) {
    if (key.empty()) return false;
    for (const char c : key) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
        if (!ok) return false;
    }
    return true;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
    throw config_error("config key '" + key + "': cannot parse '" + value + "' as " + want);
}

}  // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return from_text(text.str(), path);
}

Config Config::from_text(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw config_error(origin + ":" + std::to_string(lineno) +
                               ": expected 'key = value', got '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        if (!valid_key(key)) {
            throw config_error(origin + ":" + std::to_string(lineno) + ": invalid key '" + key +
                               "' (lowercase letters, digits, '_', '.')");
        }
        cfg.values_[key] = trim(stripped.substr(eq + 1));
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!valid_key(key)) throw config_error("invalid config key '" + key + "'");
    values_[key] = value;
}

void Config::merge_env(const std::string& prefix) {
    for (char** env = environ; env != nullptr && *env != nullptr; ++env) {
        const std::string entry(*env);
        if (entry.compare(0, prefix.size(), prefix) != 0) continue;
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos || eq <= prefix.size()) continue;
        std::string key = entry.substr(prefix.size(), eq - prefix.size());
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (!valid_key(key)) {
            throw config_error("environment override '" + entry.substr(0, eq) +
                               "' does not map to a valid config key");
        }
        values_[key] = entry.substr(eq + 1);
    }
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

std::string Config::get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw config_error("missing required config key '" + key + "'");
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::int64_t Config::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    errno = 0;
    char* end = nullptr;
    const long long parsed = std::strtoll(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0') bad_value(key, v, "an integer");
    return static_cast<std::int64_t>(parsed);
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_uint(const std::string& key) const {
    const std::string v = get_string(key);
    if (!v.empty() && v[0] == '-') bad_value(key, v, "a non-negative integer");
    errno = 0;
    char* end = nullptr;
    const unsigned long long parsed = std::strtoull(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0') bad_value(key, v, "a non-negative integer");
    return static_cast<std::uint64_t>(parsed);
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_uint(key) : fallback;
}

double Config::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    errno = 0;
    char* end = nullptr;
    const double parsed = std::strtod(v.c_str(), &end);
    if (errno != 0 || end == v.c_str() || *end != '\0') bad_value(key, v, "a number");
    return parsed;
}

double Config::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
    std::string v = get_string(key);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    bad_value(key, get_string(key), "a boolean (true/false/1/0/yes/no/on/off)");
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
    const std::string v = get_string(key);
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const std::size_t comma = v.find(',', start);
        const std::string item =
            trim(comma == std::string::npos ? v.substr(start) : v.substr(start, comma - start));
        if (item.empty()) bad_value(key, v, "a comma-separated number list");
        errno = 0;
        char* end = nullptr;
        const double parsed = std::strtod(item.c_str(), &end);
        if (errno != 0 || end == item.c_str() || *end != '\0') {
            bad_value(key, v, "a comma-separated number list");
        }
        out.push_back(parsed);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            const std::vector<double>& fallback) const {
    return has(key) ? get_double_list(key) : fallback;
}

void Config::require_known(const std::vector<std::string>& allowed) const {
    for (const auto& [key, value] : values_) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw config_error("unknown config key '" + key + "'");
        }
    }
}

std::vector<std::string> Config::keys() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [key, value] : values_) out.push_back(key);
    return out;
}

}  // namespace vqcsi::io
