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

#include "vqcsi/io/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vqcsi/errors.hpp"

namespace vqcsi::io {

namespace {

bool needs_quoting(const std::string& cell) {
    return cell.find_first_of(",\"\n\r") != std::string::npos;
}

void append_cell(std::string& out, const std::string& cell) {
    if (!needs_quoting(cell)) {
        out += cell;
        return;
    }
    out += '"';
    for (const char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

void append_row(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) out += ',';
        append_cell(out, cells[i]);
    }
    out += '\n';
}

}  // namespace

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_number(std::int64_t v) { return std::to_string(v); }

double parse_number(const std::string& cell) {
    errno = 0;
    char* end = nullptr;
    const double parsed = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0') {
        throw file_error("csv: cannot parse numeric cell '" + cell + "'");
    }
    return parsed;
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw file_error("csv: no column named '" + name + "'");
}

std::string to_csv_text(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
    require(!header.empty(), "csv: empty header");
    std::string out;
    append_row(out, header);
    for (const auto& row : rows) {
        require(row.size() == header.size(), "csv: row arity does not match the header");
        append_row(out, row);
    }
    return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    const std::string text = to_csv_text(header, rows);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw file_error("csv: cannot open '" + tmp + "' for writing");
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw file_error("csv: write to '" + tmp + "' failed");
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw file_error("csv: cannot move temporary table into '" + path + "'");
    }
}

CsvTable parse_csv_text(const std::string& text, const std::string& origin) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string cell;
    bool quoted = false;
    bool cell_started = false;

    const auto end_cell = [&] {
        record.push_back(std::move(cell));
        cell.clear();
        cell_started = false;
    };
    const auto end_record = [&] {
        end_cell();
        records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (cell.empty() && !cell_started) {
                    quoted = true;
                    cell_started = true;
                } else {
                    throw file_error(origin + ": stray quote inside an unquoted csv cell");
                }
                break;
            case ',':
                end_cell();
                break;
            case '\r':
                break;  // tolerate CRLF
            case '\n':
                end_record();
                break;
            default:
                cell += c;
                cell_started = true;
        }
    }
    if (quoted) throw file_error(origin + ": unterminated quoted csv cell");
    if (cell_started || !record.empty()) end_record();  // final line without newline

    if (records.empty()) throw file_error(origin + ": csv table has no header row");
    CsvTable table;
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size()) {
            throw file_error(origin + ": csv row " + std::to_string(r) + " has " +
                             std::to_string(records[r].size()) + " cells, header has " +
                             std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw file_error("csv: cannot open '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_csv_text(text.str(), path);
}

}  // namespace vqcsi::io
