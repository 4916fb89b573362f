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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "ibpf/model.hpp"

namespace ibpf {

/// J particles, each holding a full latent state over all units and,
/// optionally, its own U x D parameter matrix (the extended model).
class Swarm {
public:
    /// Every particle uses `theta`; parameters are not resampled.
    static Swarm with_fixed_params(std::size_t particles, std::size_t state_dim, ParameterMatrix theta);
    /// J independent copies of `theta`, resampled along with the states.
    static Swarm with_particle_params(std::size_t particles, std::size_t state_dim, const ParameterMatrix& theta);

    std::size_t size() const noexcept { return particles_; }
    std::size_t units() const noexcept { return layout_->units(); }
    std::size_t state_dim() const noexcept { return state_dim_; }
    std::size_t param_dim() const noexcept { return layout_->dim(); }
    bool per_particle_params() const noexcept { return per_particle_; }
    const LayoutPtr& layout() const noexcept { return layout_; }

    std::span<double> state(std::size_t j) noexcept {
        return std::span<double>(states_).subspan(j * stride(), stride());
    }
    std::span<const double> state(std::size_t j) const noexcept {
        return std::span<const double>(states_).subspan(j * stride(), stride());
    }
    ParamsView params(std::size_t j) const noexcept {
        const std::size_t n = units() * param_dim();
        return {std::span<const double>(params_).subspan(per_particle_ ? j * n : 0, n), param_dim()};
    }
    /// Only meaningful with per-particle parameters.
    std::span<double> params_mut(std::size_t j) noexcept {
        const std::size_t n = units() * param_dim();
        return std::span<double>(params_).subspan(j * n, n);
    }
    ParameterMatrix particle_params(std::size_t j) const;

    /// Per-unit particle means taken on the estimation scale, back-transformed.
    ParameterMatrix mean_params() const;

    /// Replaces the units of `block` in every particle j by those of ancestors[j].
    void resample_block(std::span<const std::size_t> block, std::span<const std::size_t> ancestors);
    /// Commits all resample_block calls made since the previous commit.
    void commit_resample();

private:
    Swarm(std::size_t particles, std::size_t state_dim, LayoutPtr layout, bool per_particle);
    std::size_t stride() const noexcept { return units() * state_dim_; }

    std::size_t particles_;
    std::size_t state_dim_;
    LayoutPtr layout_;
    bool per_particle_;
    std::vector<double> states_, params_;
    std::vector<double> next_states_, next_params_;
};

struct FilterFailure {
    std::size_t n;      // time index, 1-based
    std::size_t block;  // 0-based
};

struct FilterResult {
    double loglik = 0.0;
    std::size_t times = 0;
    std::size_t blocks = 0;
    std::vector<double> cond_loglik;  // times x blocks, row-major
    std::vector<double> ess;          // times x blocks
    std::vector<FilterFailure> failures;
    std::vector<double> filter_mean;  // times x units x state_dim, when requested

    double cond(std::size_t n, std::size_t b) const noexcept { return cond_loglik[(n - 1) * blocks + b]; }
    double ess_at(std::size_t n, std::size_t b) const noexcept { return ess[(n - 1) * blocks + b]; }

    nlohmann::json to_json() const;
    /// Rows of (n, block, cond_loglik, ess) with 1-based n and block.
    void write_csv(std::ostream& os) const;
};

/// Contribution of a block whose particles all have zero weight.
inline constexpr double kFailureLogLik = -708.39641853226408;  // log(DBL_MIN)

struct BlockResample {
    std::vector<std::size_t> ancestors;
    double cond_loglik = 0.0;  // log(mean weight)
    double ess = 0.0;
    bool failed = false;
};

/// Per-particle log-weights for one block at time n: the sum over the
/// block's units of the measurement log-density. Missing data contribute 0.
std::vector<double> block_log_weights(const SpatPompModel& model, const PanelData& data, std::size_t n,
                                      std::span<const std::size_t> block, const Swarm& swarm);

/// Systematic resampling of J = log_weights.size() particles.
BlockResample resample_block(std::span<const double> log_weights, Rng& rng);

struct FilterOptions {
    BlockPartition blocks;
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;  // keys the random streams of an IBPF iteration
    bool filter_mean = false;
};

struct SweepHooks {
    std::function<void(std::size_t n, Swarm&)> before_predict;  // n = 1..N
    std::function<void(std::size_t n, Swarm&)> after_resample;
};

/// One block particle filter pass over the data, starting by initializing
/// the latent states of `swarm` from its current parameters.
FilterResult filter_sweep(const SpatPompModel& model, const PanelData& data, Swarm& swarm,
                          const FilterOptions& options, const SweepHooks& hooks = {});

/// Block particle filter likelihood evaluation at fixed parameters.
FilterResult bpf_run(const SpatPompModel& model, const PanelData& data, const ParameterMatrix& theta,
                     std::size_t particles, const FilterOptions& options);

/// log(mean(exp(v))) evaluated without overflow.
double log_mean_exp(std::span<const double> v) noexcept;

}  // namespace ibpf
