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

#include "ibpf/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "ibpf/error.hpp"

namespace ibpf::io {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail_input(source + ": missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    const auto& s = rows[row][col];
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(row, "expected a number, found '" + s + "'");
    return v;
}

void CsvTable::fail(std::size_t row, const std::string& msg) const {
    fail_input(source + ":" + std::to_string(lines[row]) + ": " + msg);
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail_input("cannot open " + path.string());
    CsvTable t;
    t.source = path.string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || line[0] == '#') continue;
        auto fields = split(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            fail_input(t.source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                       " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.lines.push_back(lineno);
    }
    if (t.header.empty()) fail_input(t.source + ": empty file");
    return t;
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail_input("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail_input(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_input("cannot write " + path.string());
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_input("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string sha256_file(const std::filesystem::path& path) {
    const auto bytes = read_text(path);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCategory::internal, "SHA-256 failed for " + path.string());
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

double decimal_year(std::string_view iso) {
    int y = 0, m = 0, d = 0;
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-' ||
        std::from_chars(iso.data(), iso.data() + 4, y).ec != std::errc() ||
        std::from_chars(iso.data() + 5, iso.data() + 7, m).ec != std::errc() ||
        std::from_chars(iso.data() + 8, iso.data() + 10, d).ec != std::errc() || m < 1 || m > 12 || d < 1 || d > 31)
        fail_input("malformed date '" + std::string(iso) + "'");
    static constexpr int cumulative[] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    const int doy = cumulative[m - 1] + d + (leap && m > 2 ? 1 : 0);
    return y + (doy - 1) / 365.25;
}

Panel read_panel_csv(const std::filesystem::path& path, const std::vector<std::string>& unit_names, double t0,
                     double index_step) {
    const auto table = read_csv(path);
    if (table.header.size() != 3) fail_input(table.source + ": expected columns <time>,unit,cases");
    std::map<std::string, std::size_t> unit_index;
    for (std::size_t u = 0; u < unit_names.size(); ++u) unit_index[unit_names[u]] = u;

    std::map<double, std::size_t> time_index;
    std::vector<double> row_time(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& key = table.rows[r][0];
        double t = 0.0;
        if (key.find('-') != std::string::npos && key.size() == 10) {
            t = decimal_year(key);
        } else {
            long long k = 0;
            const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), k);
            if (ec != std::errc() || ptr != key.data() + key.size()) table.fail(r, "bad time key '" + key + "'");
            t = t0 + static_cast<double>(k) * index_step;
        }
        row_time[r] = t;
        time_index.emplace(t, 0);
    }
    std::vector<double> times;
    for (auto& [t, idx] : time_index) {
        idx = times.size() + 1;
        times.push_back(t);
    }
    Panel panel{PanelData(unit_names.size(), times.size()), times};
    panel.data.unit_names = unit_names;
    std::vector<bool> filled(unit_names.size() * times.size(), false);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto it = unit_index.find(table.rows[r][1]);
        if (it == unit_index.end()) table.fail(r, "unknown unit '" + table.rows[r][1] + "'");
        const std::size_t n = time_index.at(row_time[r]);
        if (filled[it->second * times.size() + n - 1]) table.fail(r, "duplicate observation");
        filled[it->second * times.size() + n - 1] = true;
        const auto& cell = table.rows[r][2];
        if (cell == "NA" || cell.empty()) continue;
        const double y = table.number(r, 2);
        if (y < 0.0) table.fail(r, "negative case count");
        panel.data(it->second, n) = y;
    }
    return panel;
}

void write_panel_csv(const std::filesystem::path& path, const PanelData& data) {
    std::ostringstream os;
    os << "week,unit,cases\n";
    for (std::size_t n = 1; n <= data.times(); ++n)
        for (std::size_t u = 0; u < data.units(); ++u) {
            const std::string name = u < data.unit_names.size() ? data.unit_names[u] : std::to_string(u + 1);
            os << n << ',' << name << ',';
            const double y = data(u, n);
            if (PanelData::missing(y)) os << "NA";
            else os << static_cast<long long>(std::llround(y));
            os << '\n';
        }
    write_text(path, os.str());
}

}  // namespace ibpf::io
