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
// Command-line front end. One experiment configuration feeds every
// subcommand; values bind with file < environment (VQCSI_*) < flag
// precedence.

#ifndef VQCSI_HARNESS_CLI_HPP
#define VQCSI_HARNESS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace vqcsi::harness {

/// Run one CLI invocation; `args` excludes the program name. Returns the
/// process exit code: 0 on success, 2 for configuration and usage errors,
/// 3 for runtime failures (missing files, contract violations, divergence).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vqcsi::harness

#endif  // VQCSI_HARNESS_CLI_HPP
