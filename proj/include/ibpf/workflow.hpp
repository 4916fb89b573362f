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
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ibpf/ibpf.hpp"

/// Building blocks of the command-line pipeline: simulation, replicated
/// likelihood evaluation, jittered search starts and refinement rounds.
namespace ibpf::workflow {

/// Tunables read from a --config document. Keys absent from the document
/// keep these defaults; unknown keys are rejected.
struct RunConfig {
    std::size_t particles = 4000;
    std::size_t iterations = 100;
    double cooling = 0.5;
    double spat_reg = 0.1;
    double sigma = 0.005;
    std::map<std::string, double> sigma_overrides;
    nlohmann::json blocks = 1;  // block size, or explicit list of 1-based unit lists
    std::size_t eval_particles = 8000;
    std::size_t eval_reps = 10;
    bool eval_start = false;
    double jitter = 0.0;
    double quantile = 0.25;
    std::size_t copies = 4;
    std::vector<double> spat_reg_grid{0.0, 0.05, 0.1, 0.2, 0.5};
    // Synthetic covariates and simulation horizon.
    std::size_t units = 20;
    std::size_t weeks = 104;
    double t0 = 1950.0;

    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Names of the flat parameter vector (phi, psi_1, ..., psi_U); unit-specific
/// entries carry a 1-based unit suffix, as in `rho_3`.
std::vector<std::string> flat_names(const ParameterLayout& layout);

/// Latent trajectory and observations drawn from the model at theta.
PanelData simulate_panel(const SpatPompModel& model, const ParameterMatrix& theta, std::uint64_t seed);

struct EvalSummary {
    std::vector<double> logliks;
    double mean = 0.0;
    double se = 0.0;
    double log_mean_exp = 0.0;
    std::size_t failures = 0;

    nlohmann::json to_json() const;
};

/// `reps` independent block filter evaluations; replicate r uses seed
/// derive_seed(seed, r).
EvalSummary evaluate(const SpatPompModel& model, const PanelData& data, const ParameterMatrix& theta,
                     std::size_t particles, std::size_t reps, const BlockPartition& blocks, std::uint64_t seed);

/// Adds uniform(-half_width, half_width) noise to every element of the flat
/// parameter vector on the estimation scale. Pinned (infinite) values stay put.
ParameterMatrix jitter(const ParameterMatrix& base, double half_width, std::uint64_t seed);

/// Indices of the ceil(q * R) largest finite scores, best first.
std::vector<std::size_t> select_parents(std::span<const double> scores, double quantile);

BlockPartition make_blocks(std::size_t units, const nlohmann::json& spec);
IbpfConfig make_ibpf_config(const RunConfig& rc, const ParameterLayout& layout, std::size_t times,
                            const std::map<std::string, double>& model_overrides);

struct ReplicateOutcome {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::optional<std::size_t> parent;
    bool ok = false;
    std::string error;
    std::optional<ParameterMatrix> start;
    std::optional<ParameterMatrix> final;
    std::optional<EvalSummary> start_eval;
    std::optional<EvalSummary> final_eval;
    std::vector<IterationRecord> trace;
};

/// One IBPF search from `start` followed by re-evaluation of its estimate.
/// Failures are captured in the outcome rather than thrown.
ReplicateOutcome run_replicate(const SpatPompModel& model, const PanelData& data, const RunConfig& rc,
                               const IbpfConfig& config, const ParameterMatrix& start, std::size_t index,
                               std::uint64_t seed);

/// Writes trace.csv (iteration, loglik, failures), timing.csv and
/// params.csv for one replicate under `dir`.
void write_replicate_files(const ReplicateOutcome& r, const std::filesystem::path& dir);

struct SearchRound {
    std::size_t round = 1;
    double quantile = 0.0;
    std::size_t copies = 0;
    std::vector<ReplicateOutcome> replicates;

    /// Evaluated final logliks, -inf for failed replicates.
    std::vector<double> scores() const;
    nlohmann::json to_json() const;
    /// Reads the summary of a previous round; parameter documents are
    /// interpreted against `layout`.
    static SearchRound from_json(const nlohmann::json& j, const LayoutPtr& layout);
};

}  // namespace ibpf::workflow
