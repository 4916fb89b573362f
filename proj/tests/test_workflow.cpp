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
#include <vector>

#include "doctest.h"
#include "ibpf/error.hpp"
#include "ibpf/measles.hpp"
#include "ibpf/workflow.hpp"
#include "toy_models.hpp"

using namespace ibpf;
using namespace ibpf::workflow;

TEST_CASE("run config parsing") {
    const auto rc = RunConfig::from_json({{"J", 10}, {"M", 3}, {"sigma", 0.00125}, {"blocks", 2}});
    CHECK(rc.particles == 10);
    CHECK(rc.iterations == 3);
    CHECK(rc.sigma == 0.00125);
    CHECK(rc.eval_particles == 8000);
    CHECK(rc.eval_reps == 10);
    CHECK(RunConfig::from_json(rc.to_json()).to_json() == rc.to_json());
    CHECK_THROWS_AS(RunConfig::from_json({{"particles", 10}}), Error);
    CHECK_THROWS_AS(RunConfig::from_json({{"J", "many"}}), Error);
}

TEST_CASE("parent selection") {
    const std::vector<double> scores{-10, -3, -7, -1, -20, -INFINITY, -5, -9};
    const auto parents = select_parents(scores, 0.25);
    CHECK(parents == std::vector<std::size_t>{3, 1});
    CHECK(parents.size() * 4 == 8);
    const std::vector<double> failed(4, -INFINITY);
    CHECK_THROWS_AS(select_parents(failed, 0.25), Error);
}

TEST_CASE("jittered starts stay within the requested box") {
    const auto layout = std::make_shared<const ParameterLayout>(measles::submodel_layout(measles::Submodel::A, 3));
    const auto cov = measles::synthetic_covariates(3, 1940, 1960, 1);
    TimeGrid g{1950.0, {1950.1}, 1.0 / 365.25};
    measles::Model m(measles::Submodel::A, cov, g);
    const auto truth = m.params_matrix(measles::simulation_params());
    const auto j = jitter(truth, 0.1, 42);
    std::vector<Transform> transforms;
    for (auto d : layout->shared_columns()) transforms.push_back(layout->entry(d).transform);
    for (std::size_t u = 0; u < 3; ++u)
        for (auto d : layout->unit_specific_columns()) transforms.push_back(layout->entry(d).transform);
    const auto a = collapse(truth), b = collapse(j);
    REQUIRE(a.size() == transforms.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto t = transforms[i];
        const double ea = to_estimation_scale(a[i], t), eb = to_estimation_scale(b[i], t);
        if (std::isfinite(ea)) {
            CHECK(std::abs(eb - ea) <= 0.1 + 1e-12);
            CHECK(eb != ea);
        } else {
            CHECK(b[i] == a[i]);
        }
    }
    // Shared values stay equal across units.
    for (auto d : layout->shared_columns()) CHECK(j(1, d) == j(0, d));
}

TEST_CASE("evaluation of a density-one model") {
    ibpf::testing::FixedDensityModel m({1.0}, 3);
    PanelData d(1, 3, {0, 0, 0});
    const auto e = evaluate(m, d, m.no_params(), 5, 4, BlockPartition::singletons(1), 1);
    CHECK(e.mean == 0.0);
    CHECK(e.se == 0.0);
    CHECK(e.logliks.size() == 4);
}

TEST_CASE("flat names") {
    const auto layout = measles::submodel_layout(measles::Submodel::A, 2);
    const auto names = flat_names(layout);
    CHECK(names.size() == layout.flat_size());
    CHECK(names.front() == "psi");
    CHECK(names.back() == "rho_2");
}

TEST_CASE("search rounds round trip through JSON") {
    ibpf::testing::GaussianWalkModel m(2, 6);
    ParameterMatrix theta(m.layout());
    theta.set("q", 1.0);
    theta.set("r", 0.5);
    theta.set("x0", 0.0);
    PanelData d(2, 6, std::vector<double>(12, 0.2));
    RunConfig rc;
    rc.particles = 50;
    rc.iterations = 2;
    rc.eval_particles = 50;
    rc.eval_reps = 2;
    rc.eval_start = true;
    const auto cfg = make_ibpf_config(rc, *m.layout(), 6, {});
    SearchRound round;
    round.replicates.push_back(run_replicate(m, d, rc, cfg, theta, 0, 7));
    REQUIRE(round.replicates[0].ok);
    CHECK(round.replicates[0].trace.size() == 2);
    const auto back = SearchRound::from_json(round.to_json(), m.layout());
    CHECK(back.replicates.size() == 1);
    CHECK(back.scores() == round.scores());
    CHECK(back.replicates[0].final->values()[0] == round.replicates[0].final->values()[0]);
    const auto again = run_replicate(m, d, rc, cfg, theta, 0, 7);
    CHECK(again.final_eval->logliks == round.replicates[0].final_eval->logliks);
}
