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
#include <span>
#include <string>
#include <vector>

#include "ibpf/parameters.hpp"
#include "ibpf/rng.hpp"

namespace ibpf {

/// Observation schedule and process step size, in model time units.
struct TimeGrid {
    double t0 = 0.0;
    std::vector<double> obs_times;
    double dt = 1.0;

    std::size_t size() const noexcept { return obs_times.size(); }
    /// t_{n}, with t_0 the origin; n ranges over 0..N.
    double time(std::size_t n) const noexcept { return n == 0 ? t0 : obs_times[n - 1]; }
    /// Number of equal substeps used to advance from t_{n-1} to t_n.
    std::size_t substeps(std::size_t n) const noexcept;

    void validate() const;
};

/// Parameters of a single particle: U rows of D natural-scale values.
struct ParamsView {
    std::span<const double> values;
    std::size_t dim = 0;

    std::span<const double> row(std::size_t u) const noexcept { return values.subspan(u * dim, dim); }
};

/// A spatiotemporal POMP. Implementations advance the full coupled state of one
/// particle and evaluate per-unit measurement densities. They are stateless
/// between calls, so distinct particles may be processed concurrently.
class SpatPompModel {
public:
    virtual ~SpatPompModel() = default;

    virtual std::size_t units() const noexcept = 0;
    /// Latent state components per unit.
    virtual std::size_t state_dim() const noexcept = 0;
    virtual std::vector<std::string> state_names() const = 0;
    virtual const LayoutPtr& layout() const noexcept = 0;
    virtual const TimeGrid& time_grid() const noexcept = 0;

    /// Writes X_0 for one particle; `x` has units() * state_dim() entries.
    virtual void init_state(ParamsView theta, std::span<double> x, Rng& rng) const = 0;

    /// One increment X(t) -> X(t + dt). Unit u's increment may read the
    /// whole state but only row u of `theta`.
    virtual void step(std::span<double> x, ParamsView theta, double t, double dt, Rng& rng) const = 0;

    /// Clears per-interval accumulators before an observation interval.
    virtual void reset_accumulators(std::span<double> /*x*/) const {}

    /// log f(y_u | x_u; theta_u). `y` is never NaN here: missing values are
    /// handled by the filter. May return -infinity, never NaN.
    virtual double meas_logdensity(std::size_t u, double y, std::span<const double> x_u,
                                   std::span<const double> theta_u) const = 0;

    virtual double meas_simulate(std::size_t u, std::span<const double> x_u, std::span<const double> theta_u,
                                 Rng& rng) const = 0;
};

/// Advances one particle from t_{n-1} to t_n, resetting accumulators first.
void propagate(const SpatPompModel& model, std::span<double> x, ParamsView theta, std::size_t n, Rng& rng);

/// Partition of units 0..U-1 into blocks used for independent resampling.
class BlockPartition {
public:
    static BlockPartition singletons(std::size_t units);
    static BlockPartition contiguous(std::size_t units, std::size_t block_size);
    /// Blocks are kept in the given order; each unit must appear exactly once.
    static BlockPartition from_blocks(std::size_t units, std::vector<std::vector<std::size_t>> blocks);

    std::size_t units() const noexcept { return block_of_.size(); }
    std::size_t size() const noexcept { return blocks_.size(); }
    std::span<const std::size_t> block(std::size_t b) const noexcept { return blocks_[b]; }
    std::size_t block_of(std::size_t u) const noexcept { return block_of_[u]; }

    nlohmann::json to_json() const;  // 1-based unit numbers
    static BlockPartition from_json(std::size_t units, const nlohmann::json& j);

private:
    BlockPartition(std::vector<std::vector<std::size_t>> blocks, std::size_t units);

    std::vector<std::vector<std::size_t>> blocks_;
    std::vector<std::size_t> block_of_;
};

/// U x N panel of observations. Missing entries are NaN.
class PanelData {
public:
    PanelData(std::size_t units, std::size_t times);
    PanelData(std::size_t units, std::size_t times, std::vector<double> values);

    std::size_t units() const noexcept { return units_; }
    std::size_t times() const noexcept { return times_; }
    /// Observation for unit u at time index n (1-based, matching t_n).
    double operator()(std::size_t u, std::size_t n) const noexcept { return values_[u * times_ + (n - 1)]; }
    double& operator()(std::size_t u, std::size_t n) noexcept { return values_[u * times_ + (n - 1)]; }
    static bool missing(double y) noexcept { return y != y; }

    std::vector<std::string> unit_names;

private:
    std::size_t units_, times_;
    std::vector<double> values_;
};

}  // namespace ibpf
