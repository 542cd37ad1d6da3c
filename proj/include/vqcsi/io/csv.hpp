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
// Schema-stable CSV emission and parsing. Every table carries a fixed header
// row; writers enforce the column count on every row, and numbers are
// formatted with shortest-round-trip precision so files parse back exactly.

#ifndef VQCSI_IO_CSV_HPP
#define VQCSI_IO_CSV_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace vqcsi::io {

/// Shortest decimal string that parses back to exactly `v`.
std::string format_number(double v);
std::string format_number(std::int64_t v);

/// Parse one numeric cell; throws file_error on garbage.
double parse_number(const std::string& cell);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position of `name`; throws file_error when absent.
    std::size_t column(const std::string& name) const;
};

/// Serialize a table. Cells containing commas, quotes, or newlines are
/// quoted with doubled inner quotes; every row must match the header arity.
std::string to_csv_text(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows);

/// Write the whole table through a temporary file renamed into place, so a
/// failed run never leaves a partial table at `path`.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

CsvTable parse_csv_text(const std::string& text, const std::string& origin = "<text>");
CsvTable read_csv(const std::string& path);

}  // namespace vqcsi::io

#endif  // VQCSI_IO_CSV_HPP
