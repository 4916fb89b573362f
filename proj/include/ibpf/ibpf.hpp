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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ibpf/block_filter.hpp"

namespace ibpf {

/// Random-walk standard deviations on the estimation scale, one row per
/// parameter and one column per time index n = 0..N.
class SigmaSchedule {
public:
    SigmaSchedule() = default;
    SigmaSchedule(std::size_t dim, std::size_t times) : dim_(dim), times_(times), sigma_(dim * (times + 1), 0.0) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t times() const noexcept { return times_; }
    double operator()(std::size_t d, std::size_t n) const noexcept { return sigma_[n * dim_ + d]; }
    double& operator()(std::size_t d, std::size_t n) noexcept { return sigma_[n * dim_ + d]; }
    /// The D standard deviations used at time index n.
    std::span<const double> column(std::size_t n) const noexcept {
        return std::span<const double>(sigma_).subspan(n * dim_, dim_);
    }

private:
    std::size_t dim_ = 0, times_ = 0;
    std::vector<double> sigma_;
};

/// Every parameter walks with sd `base` (or its override) at all n, except
/// initial value parameters, which get twice that at n = 0 and 0 afterwards.
SigmaSchedule build_sigma_schedule(const ParameterLayout& layout, double base, std::size_t times,
                                   const std::map<std::string, double>& overrides = {});

/// Variance multiplier a^(2m/50) at iteration m. The sd multiplier is its root.
double cooling_factor(double a, std::size_t m);

/// Adds independent N(0, (multiplier * sigma_d)^2) noise to each of the U x D
/// natural-scale values on the estimation scale.
void perturb(std::span<double> params, const ParameterLayout& layout, std::span<const double> sigma,
             double sd_multiplier, Rng& rng);

/// Perturbs every particle of a per-particle-parameter swarm. Streams are
/// keyed by (seed, iteration, n, particle).
void perturb(Swarm& swarm, std::span<const double> sigma, double sd_multiplier, std::uint64_t seed,
             std::uint64_t iteration, std::size_t n);

/// Spatial autoregressive correction: pulls each block's copies of every
/// shared parameter toward the across-block mean by a fraction spat_reg, on
/// the estimation scale. Unit-specific columns are untouched.
void ar_correct(Swarm& swarm, const BlockPartition& blocks, double spat_reg);

/// Across-unit standard deviation, on the estimation scale, of the particle
/// means of each shared parameter (ordered as layout.shared_columns()).
std::vector<double> shared_unit_spread(const Swarm& swarm);

struct IbpfConfig {
    std::size_t particles = 4000;
    std::size_t iterations = 100;
    double cooling = 0.5;
    double spat_reg = 0.1;
    BlockPartition blocks = BlockPartition::singletons(1);
    SigmaSchedule sigma;

    void validate(const ParameterLayout& layout, std::size_t times) const;
};

struct IterationRecord {
    std::size_t iteration = 0;
    /// Block filter log-likelihood of the perturbed (extended) model.
    double loglik = 0.0;
    double wall_seconds = 0.0;
    std::size_t failures = 0;
    /// Collapsed point estimate (phi, psi_1, ..., psi_U) of the swarm mean.
    std::vector<double> estimate;
    std::vector<double> shared_spread;
};

struct IbpfResult {
    Swarm swarm;
    std::vector<IterationRecord> trace;

    ParameterMatrix estimate() const;
};

/// Iterated block particle filter. The initial swarm holds J copies of `start`.
IbpfResult ibpf_run(const SpatPompModel& model, const PanelData& data, const IbpfConfig& config,
                    const ParameterMatrix& start, std::uint64_t seed);

IbpfResult ibpf_run(const SpatPompModel& model, const PanelData& data, const IbpfConfig& config, Swarm swarm,
                    std::uint64_t seed);

}  // namespace ibpf
