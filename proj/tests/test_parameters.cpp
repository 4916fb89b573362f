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
#include <memory>
#include <vector>

#include "doctest.h"
#include "ibpf/error.hpp"
#include "ibpf/measles.hpp"
#include "ibpf/parameters.hpp"
#include "ibpf/rng.hpp"

using namespace ibpf;

namespace {

LayoutPtr two_param_layout(std::size_t units) {
    return std::make_shared<const ParameterLayout>(
        std::vector<ParameterEntry>{{"a", ParamKind::shared, Transform::identity, false},
                                    {"rho", ParamKind::unit_specific, Transform::logit, false}},
        units);
}

}  // namespace

TEST_CASE("expand_shared replicates shared entries") {
    const auto layout = two_param_layout(2);
    const std::vector<double> theta{0.5, 0.4, 0.6};
    const auto pm = expand_shared(theta, layout);
    CHECK(pm(0, 0) == 0.5);
    CHECK(pm(1, 0) == 0.5);
    CHECK(pm(0, 1) == 0.4);
    CHECK(pm(1, 1) == 0.6);
    CHECK(collapse(pm) == theta);
}

TEST_CASE("expand_shared with one unit is a reshape") {
    const auto layout = two_param_layout(1);
    const std::vector<double> theta{0.25, 0.3};
    const auto pm = expand_shared(theta, layout);
    CHECK(std::vector<double>(pm.values().begin(), pm.values().end()) == theta);
}

TEST_CASE("expand_shared rejects a dimension mismatch") {
    const auto layout = two_param_layout(2);
    const std::vector<double> theta{0.5, 0.4};
    CHECK_THROWS_AS(expand_shared(theta, layout), Error);
}

TEST_CASE("measles submodel A expands to 9 constant shared columns") {
    const auto layout = std::make_shared<const ParameterLayout>(measles::submodel_layout(measles::Submodel::A, 20));
    CHECK(layout->dim() == 13);
    CHECK(layout->shared_columns().size() == 9);
    CHECK(layout->unit_specific_columns().size() == 4);
    CHECK(layout->flat_size() == 9 + 4 * 20);
    std::vector<double> flat(layout->flat_size());
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = 0.01 + 0.001 * static_cast<double>(i);
    const auto pm = expand_shared(flat, layout);
    for (auto d : layout->shared_columns())
        for (std::size_t u = 1; u < 20; ++u) CHECK(pm(u, d) == pm(0, d));
}

TEST_CASE("collapse averages shared columns on the estimation scale") {
    const auto layout = std::make_shared<const ParameterLayout>(
        std::vector<ParameterEntry>{{"G", ParamKind::shared, Transform::log, false}}, 2);
    ParameterMatrix ones(layout, {1.0, 1.0});
    CHECK(collapse(ones)[0] == 1.0);
    ParameterMatrix pm(layout, {2.0, 8.0});
    CHECK(collapse(pm)[0] == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("scalar transforms") {
    CHECK(to_estimation_scale(1.0, Transform::log) == 0.0);
    CHECK(to_estimation_scale(0.5, Transform::logit) == 0.0);
    CHECK(to_estimation_scale(-3.0, Transform::identity) == -3.0);
    CHECK_THROWS_AS(to_estimation_scale(1.2, Transform::logit), Error);
    CHECK_THROWS_AS(to_estimation_scale(-1.0, Transform::log), Error);
    CHECK(to_estimation_scale(0.0, Transform::log) == -INFINITY);
    CHECK(to_estimation_scale(0.0, Transform::logit) == -INFINITY);
    CHECK(to_estimation_scale(1.0, Transform::logit) == INFINITY);
    CHECK(from_estimation_scale(-INFINITY, Transform::logit) == 0.0);
    CHECK(from_estimation_scale(-INFINITY, Transform::log) == 0.0);
}

TEST_CASE("transform round trip to 1e-12 relative") {
    const auto layout = std::make_shared<const ParameterLayout>(
        std::vector<ParameterEntry>{{"x", ParamKind::shared, Transform::log, false},
                                    {"p", ParamKind::unit_specific, Transform::logit, false},
                                    {"z", ParamKind::unit_specific, Transform::identity, false}},
        7);
    auto rng = make_rng(5, Purpose::misc, {});
    for (int trial = 0; trial < 200; ++trial) {
        ParameterMatrix pm(layout);
        for (std::size_t u = 0; u < 7; ++u) {
            pm(u, 0) = std::exp(20.0 * (rng.uniform() - 0.5));
            pm(u, 1) = rng.uniform();
            pm(u, 2) = 100.0 * (rng.uniform() - 0.5);
        }
        const auto back = from_estimation_scale(to_estimation_scale(pm), layout);
        for (std::size_t i = 0; i < pm.values().size(); ++i)
            CHECK(std::abs(back.values()[i] - pm.values()[i]) <= 1e-12 * std::abs(pm.values()[i]));
    }
}

TEST_CASE("layout rejects duplicate names") {
    CHECK_THROWS_AS(ParameterLayout({{"a", ParamKind::shared, Transform::log, false},
                                     {"a", ParamKind::shared, Transform::log, false}},
                                    1),
                    Error);
}

TEST_CASE("parameter documents round trip") {
    const auto layout = two_param_layout(3);
    const auto pm = expand_shared(std::vector<double>{0.5, 0.1, 0.2, 0.3}, layout);
    const auto doc = to_json(pm);
    CHECK(doc.at("units") == 3);
    const auto back = parameter_matrix_from_json(doc, layout);
    CHECK(std::vector<double>(back.values().begin(), back.values().end()) ==
          std::vector<double>(pm.values().begin(), pm.values().end()));
    const auto self = parameter_matrix_from_json(doc);
    CHECK(self.layout() == *layout);
    auto bad = doc;
    bad["parameters"][1]["values"][0] = 1.5;
    CHECK_THROWS_AS(parameter_matrix_from_json(bad, layout), Error);
    auto missing = doc;
    missing["parameters"].erase(0);
    CHECK_THROWS_AS(parameter_matrix_from_json(missing, layout), Error);
}
