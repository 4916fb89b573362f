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
#include "ibpf/block_filter.hpp"
#include "ibpf/error.hpp"
#include "ibpf/oracle.hpp"
#include "toy_models.hpp"

using namespace ibpf;
using namespace ibpf::oracle;

namespace {

FiniteSpatHMM two_state_uniform() {
    FiniteSpatHMM h;
    h.units = 1;
    h.states = 2;
    h.symbols = 2;
    h.kernel = {0.5, 0.5, 0.5, 0.5};
    h.emissions = {0.9, 0.1, 0.1, 0.9};
    h.init = {0.5, 0.5};
    return h;
}

}  // namespace

TEST_CASE("single-state HMM likelihood is the sum of log emissions") {
    FiniteSpatHMM h;
    h.units = 2;
    h.states = 1;
    h.symbols = 3;
    h.kernel = {1.0};
    h.emissions = {0.2, 0.3, 0.5, 0.6, 0.3, 0.1};
    h.init = {1.0};
    PanelData d(2, 3, {0, 2, 1, 1, 1, 0});
    const double expected = std::log(0.2) + std::log(0.5) + std::log(0.3) + std::log(0.3) + std::log(0.3) + std::log(0.6);
    CHECK(exact_loglik(h, d) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("two-state HMM against explicit enumeration of four paths") {
    const auto h = two_state_uniform();
    PanelData d(1, 2, {1, 1});
    double total = 0.0;
    const double e[2] = {0.1, 0.9};  // P[y=1 | x]
    for (int x1 = 0; x1 < 2; ++x1)
        for (int x2 = 0; x2 < 2; ++x2) total += 0.5 * e[x1] * 0.5 * e[x2];
    CHECK(exact_loglik(h, d) == doctest::Approx(std::log(total)).epsilon(1e-14));
    CHECK(brute_force_loglik(h, d) == doctest::Approx(std::log(total)).epsilon(1e-14));
}

TEST_CASE("forward recursion matches path enumeration") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto coupled = random_coupled_hmm(2, 3, 3, 0.6, seed);
        const auto dense = random_dense_hmm(2, 3, 2, seed);
        for (std::size_t N : {1u, 3u, 6u}) {
            const auto d1 = simulate(coupled, N, seed + 10);
            CHECK(std::abs(exact_loglik(coupled, d1) - brute_force_loglik(coupled, d1)) < 1e-10);
            auto d2 = simulate(dense, N, seed + 20);
            if (N > 2) d2(1, 2) = std::nan("");
            CHECK(std::abs(exact_loglik(dense, d2) - brute_force_loglik(dense, d2)) < 1e-10);
        }
    }
}

TEST_CASE("HMM validation") {
    auto h = two_state_uniform();
    h.kernel[0] = 0.6;
    CHECK_THROWS_AS(h.validate(), Error);
    FiniteSpatHMM big;
    big.units = 7;
    big.states = 8;
    CHECK_THROWS_AS(big.validate(), Error);
    const auto c = random_coupled_hmm(2, 3, 2, 0.3, 4);
    const auto back = FiniteSpatHMM::from_json(c.to_json());
    CHECK(back.kernel == c.kernel);
    PanelData bad(2, 1, {0, 5});
    CHECK_THROWS_AS(exact_loglik(c, bad), Error);
}

TEST_CASE("marginal of an uncoupled HMM factorizes the likelihood") {
    const auto h = random_coupled_hmm(2, 3, 3, 0.0, 8);
    const auto d = simulate(h, 8, 9);
    double sum = 0.0;
    for (std::size_t u = 0; u < 2; ++u) {
        PanelData du(1, 8);
        for (std::size_t n = 1; n <= 8; ++n) du(0, n) = d(u, n);
        sum += exact_loglik(marginal_hmm(h, u), du);
    }
    CHECK(exact_loglik(h, d) == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("plain particle filter") {
    SUBCASE("density one") {
        ibpf::testing::FixedDensityModel m({1.0, 1.0}, 4);
        PanelData d(2, 4, std::vector<double>(8, 0.0));
        CHECK(plain_pf_loglik(m, d, m.no_params(), 10, 1) == 0.0);
        CHECK_THROWS_AS(plain_pf_loglik(m, d, m.no_params(), 1, 1), Error);
    }
    SUBCASE("agrees with the exact likelihood") {
        const auto h = random_coupled_hmm(2, 3, 3, 0.5, 12);
        const auto d = simulate(h, 10, 13);
        HmmModel m(h, 10);
        std::vector<double> ll;
        for (std::uint64_t r = 0; r < 10; ++r) ll.push_back(plain_pf_loglik(m, d, m.no_params(), 5000, derive_seed(3, r)));
        double mean = 0.0, ss = 0.0;
        for (double v : ll) mean += v / 10.0;
        for (double v : ll) ss += (v - mean) * (v - mean);
        CHECK(std::abs(mean - exact_loglik(h, d)) < 3.0 * std::sqrt(ss / 9.0 / 10.0) + 0.01);
    }
}

TEST_CASE("singleton-block filter is unbiased without coupling") {
    const auto h = random_coupled_hmm(2, 3, 3, 0.0, 21);
    const auto d = simulate(h, 10, 22);
    HmmModel m(h, 10);
    const double exact = exact_loglik(h, d);
    double mean_ratio = 0.0;
    for (std::uint64_t r = 0; r < 50; ++r) {
        const auto res = bpf_run(m, d, m.no_params(), 10000, FilterOptions{BlockPartition::singletons(2), derive_seed(5, r), 0, false});
        mean_ratio += std::exp(res.loglik - exact) / 50.0;
    }
    CHECK(mean_ratio >= 0.9);
    CHECK(mean_ratio <= 1.1);
}
