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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ibpf/model.hpp"

/// Reference computations used to check the filters: the exact forward
/// algorithm for small finite-state coupled HMMs and an unblocked bootstrap
/// particle filter.
namespace ibpf::oracle {

/// U units, each with `states` latent states and `symbols` observable
/// symbols. Joint states are encoded as sum_u x_u * states^u.
struct FiniteSpatHMM {
    std::size_t units = 1;
    std::size_t states = 1;
    std::size_t symbols = 1;
    std::vector<double> kernel;     // joint x joint, row = current state
    std::vector<double> emissions;  // units x states x symbols
    std::vector<double> init;       // joint

    std::size_t joint_size() const noexcept;
    std::size_t unit_state(std::size_t joint, std::size_t u) const noexcept;
    double transition(std::size_t from, std::size_t to) const noexcept { return kernel[from * joint_size() + to]; }
    double emission(std::size_t u, std::size_t x, std::size_t y) const noexcept {
        return emissions[(u * states + x) * symbols + y];
    }

    /// Row sums of kernel and emissions and the initial distribution must be
    /// 1 within 1e-12; the joint space may not exceed 10^6 states.
    void validate() const;

    nlohmann::json to_json() const;
    static FiniteSpatHMM from_json(const nlohmann::json& j);
};

/// Kernel in which each unit moves independently given the whole current
/// state: unit u draws from a random row mixed with weight `coupling` toward
/// a row selected by the state of unit u+1 (cyclically). coupling = 0 gives
/// independent units.
FiniteSpatHMM random_coupled_hmm(std::size_t units, std::size_t states, std::size_t symbols, double coupling,
                                 std::uint64_t seed);

/// Random dense joint kernel with no product structure.
FiniteSpatHMM random_dense_hmm(std::size_t units, std::size_t states, std::size_t symbols, std::uint64_t seed);

/// Single-unit HMM describing unit u of a product-form HMM with zero
/// coupling.
FiniteSpatHMM marginal_hmm(const FiniteSpatHMM& hmm, std::size_t u);

/// Panel of symbols (as doubles) drawn from the HMM for times 1..N.
PanelData simulate(const FiniteSpatHMM& hmm, std::size_t times, std::uint64_t seed);

/// Exact log-likelihood by the normalized forward recursion. Missing
/// observations contribute a factor of 1.
double exact_loglik(const FiniteSpatHMM& hmm, const PanelData& data);

/// Sum over all state paths; feasible only for tiny problems.
double brute_force_loglik(const FiniteSpatHMM& hmm, const PanelData& data);

/// The HMM as a spatiotemporal POMP with one state component per unit, no
/// parameters, t0 = 0 and observations at 1..N.
class HmmModel final : public SpatPompModel {
public:
    HmmModel(FiniteSpatHMM hmm, std::size_t times);

    std::size_t units() const noexcept override { return hmm_.units; }
    std::size_t state_dim() const noexcept override { return 1; }
    std::vector<std::string> state_names() const override { return {"X"}; }
    const LayoutPtr& layout() const noexcept override { return layout_; }
    const TimeGrid& time_grid() const noexcept override { return grid_; }

    void init_state(ParamsView theta, std::span<double> x, Rng& rng) const override;
    void step(std::span<double> x, ParamsView theta, double t, double dt, Rng& rng) const override;
    double meas_logdensity(std::size_t u, double y, std::span<const double> x_u,
                           std::span<const double> theta_u) const override;
    double meas_simulate(std::size_t u, std::span<const double> x_u, std::span<const double> theta_u,
                         Rng& rng) const override;

    const FiniteSpatHMM& hmm() const noexcept { return hmm_; }
    /// The empty parameter matrix this model is evaluated at.
    ParameterMatrix no_params() const { return ParameterMatrix(layout_); }

private:
    FiniteSpatHMM hmm_;
    TimeGrid grid_;
    LayoutPtr layout_;
};

/// Standard bootstrap particle filter over the full joint state with
/// multinomial resampling at every observation time. Deliberately shares no
/// code with the block filter beyond the model interface.
double plain_pf_loglik(const SpatPompModel& model, const PanelData& data, const ParameterMatrix& theta,
                       std::size_t particles, std::uint64_t seed);

}  // namespace ibpf::oracle
