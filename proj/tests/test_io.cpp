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

#include <cmath>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "ibpf/error.hpp"
#include "ibpf/io.hpp"
#include "ibpf/measles.hpp"

using namespace ibpf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("ibpf_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("sha256 of a known string") {
    const auto dir = scratch("sha");
    io::write_text(dir / "abc.txt", "abc");
    CHECK(io::sha256_file(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("decimal years") {
    CHECK(io::decimal_year("1950-01-01") == 1950.0);
    CHECK(io::decimal_year("1950-01-08") == doctest::Approx(1950.0 + 7.0 / 365.25).epsilon(1e-15));
    CHECK_THROWS_AS(io::decimal_year("1950-13-01"), Error);
}

TEST_CASE("csv errors carry file and line") {
    const auto dir = scratch("csv");
    io::write_text(dir / "x.csv", "a,b\n1,2\n3,oops\n");
    const auto t = io::read_csv(dir / "x.csv");
    try {
        t.number(1, t.column("b"));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::input);
        CHECK(std::string(e.what()).find("x.csv:3") != std::string::npos);
    }
    CHECK_THROWS_AS(io::read_csv(dir / "missing.csv"), Error);
}

TEST_CASE("panel csv with missing values") {
    const auto dir = scratch("panel");
    io::write_text(dir / "cases.csv", "week,unit,cases\n1,a,3\n1,b,NA\n2,a,0\n2,b,7\n");
    const auto p = io::read_panel_csv(dir / "cases.csv", {"a", "b"}, 1950.0, 0.5);
    CHECK(p.times == std::vector<double>{1950.5, 1951.0});
    CHECK(p.data(0, 1) == 3.0);
    CHECK(PanelData::missing(p.data(1, 1)));
    CHECK(p.data(1, 2) == 7.0);
    io::write_panel_csv(dir / "back.csv", p.data);
    CHECK(io::read_text(dir / "back.csv") == "week,unit,cases\n1,a,3\n1,b,NA\n2,a,0\n2,b,7\n");
    io::write_text(dir / "dup.csv", "week,unit,cases\n1,a,3\n1,a,4\n");
    CHECK_THROWS_AS(io::read_panel_csv(dir / "dup.csv", {"a"}, 0.0, 1.0), Error);
    io::write_text(dir / "neg.csv", "week,unit,cases\n1,a,-3\n");
    CHECK_THROWS_AS(io::read_panel_csv(dir / "neg.csv", {"a"}, 0.0, 1.0), Error);
    io::write_text(dir / "who.csv", "week,unit,cases\n1,z,3\n");
    CHECK_THROWS_AS(io::read_panel_csv(dir / "who.csv", {"a"}, 0.0, 1.0), Error);
}

TEST_CASE("covariate directories round trip") {
    const auto dir = scratch("covars");
    const auto cov = measles::synthetic_covariates(4, 1940, 1960, 6);
    measles::write_covariates(cov, dir);
    const auto back = measles::read_covariates(dir);
    CHECK(back.names == cov.names);
    for (std::size_t u = 0; u < 4; ++u) {
        CHECK(back.population[u].values() == cov.population[u].values());
        CHECK(back.births[u].first_year() == cov.births[u].first_year());
    }
    CHECK(back.distance == cov.distance);
    fs::remove(dir / "births.csv");
    CHECK_THROWS_AS(measles::read_covariates(dir), Error);
}

TEST_CASE("annual series interpolation") {
    measles::AnnualSeries s(1950, {100.0, 200.0});
    CHECK(s.at(1949.0) == 100.0);
    CHECK(s.at(1950.25) == doctest::Approx(125.0));
    CHECK(s.at(1999.0) == 200.0);
}
