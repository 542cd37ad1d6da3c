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

#ifndef VQCSI_ERRORS_HPP
#define VQCSI_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace vqcsi {

// Violated precondition or shape/dimension mismatch on a public interface.
struct contract_error : std::invalid_argument {
    explicit contract_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Bad user-supplied configuration (file, flag, or env override).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt, truncated, or wrong-version on-disk artifact.
struct file_error : std::runtime_error {
    explicit file_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw contract_error(msg);
}

}  // namespace vqcsi

#endif  // VQCSI_ERRORS_HPP
