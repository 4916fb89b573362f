// Copyright 2026 The ibpf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ibpf/model.hpp"

namespace ibpf::io {

/// A parsed CSV file with a header row. Errors carry file and line context.
struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // 1-based source line of each row

    std::size_t column(std::string_view name) const;
    double number(std::size_t row, std::size_t col) const;
    [[noreturn]] void fail(std::size_t row, const std::string& msg) const;
};

CsvTable read_csv(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Decimal year of an ISO date (YYYY-MM-DD); day d of the year maps to year + (d - 1) / 365.25.
double decimal_year(std::string_view iso_date);

struct Panel {
    PanelData data;
    std::vector<double> times;
};

/// Reads `<time>,unit,cases` rows. The first column is either an integer
/// index k (time t0 + k * index_step) or an ISO date. `NA` marks missing.
/// Units are matched by name against `unit_names`.
Panel read_panel_csv(const std::filesystem::path& path, const std::vector<std::string>& unit_names, double t0,
                     double index_step);

/// Writes `week,unit,cases` rows with 1-based time index.
void write_panel_csv(const std::filesystem::path& path, const PanelData& data);

}  // namespace ibpf::io
