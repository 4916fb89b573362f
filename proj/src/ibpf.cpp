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

#include "ibpf/ibpf.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "ibpf/error.hpp"
#include "ibpf/parallel.hpp"

namespace ibpf {

SigmaSchedule build_sigma_schedule(const ParameterLayout& layout, double base, std::size_t times,
                                   const std::map<std::string, double>& overrides) {
    if (!(base > 0.0)) fail_usage("random walk sd must be positive");
    for (const auto& [name, value] : overrides) {
        if (!layout.find(name)) fail_usage("sigma override for unknown parameter '" + name + "'");
        if (!(value >= 0.0)) fail_usage("sigma override for '" + name + "' must be non-negative");
    }
    SigmaSchedule s(layout.dim(), times);
    for (std::size_t d = 0; d < layout.dim(); ++d) {
        const auto& e = layout.entry(d);
        const auto it = overrides.find(e.name);
        const double sd = it == overrides.end() ? base : it->second;
        if (e.ivp) {
            s(d, 0) = 2.0 * sd;
        } else {
            for (std::size_t n = 0; n <= times; ++n) s(d, n) = sd;
        }
    }
    return s;
}

double cooling_factor(double a, std::size_t m) {
    return std::pow(a, 2.0 * static_cast<double>(m) / 50.0);
}

void perturb(std::span<double> params, const ParameterLayout& layout, std::span<const double> sigma,
             double sd_multiplier, Rng& rng) {
    const std::size_t D = layout.dim();
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::size_t d = i % D;
        const double sd = sigma[d] * sd_multiplier;
        if (sd == 0.0) continue;
        const auto t = layout.entry(d).transform;
        params[i] = from_estimation_scale(to_estimation_scale(params[i], t) + sd * normal(rng), t);
    }
}

void perturb(Swarm& swarm, std::span<const double> sigma, double sd_multiplier, std::uint64_t seed,
             std::uint64_t iteration, std::size_t n) {
    bool any = false;
    for (double s : sigma) any = any || s > 0.0;
    if (!any || sd_multiplier == 0.0) return;
    const auto& layout = *swarm.layout();
    parallel_for(swarm.size(), [&](std::size_t j) {
        auto rng = make_rng(seed, Purpose::perturb, {iteration, n, j});
        perturb(swarm.params_mut(j), layout, sigma, sd_multiplier, rng);
    });
}

void ar_correct(Swarm& swarm, const BlockPartition& blocks, double spat_reg) {
    const auto& layout = *swarm.layout();
    if (spat_reg == 0.0 || layout.shared_columns().empty()) return;
    const std::size_t J = swarm.size(), D = layout.dim(), K = blocks.size();
    std::vector<double> block_mean(K);
    for (auto d : layout.shared_columns()) {
        const auto tr = layout.entry(d).transform;
        bool finite = true;
        for (std::size_t b = 0; b < K; ++b) {
            const auto block = blocks.block(b);
            double sum = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                const auto p = swarm.params(j).values;
                for (auto u : block) sum += to_estimation_scale(p[u * D + d], tr);
            }
            block_mean[b] = sum / static_cast<double>(J * block.size());
            finite = finite && std::isfinite(block_mean[b]);
        }
        // A column pinned at a transform boundary has nothing to correct.
        if (!finite) continue;
        double overall = 0.0;
        for (double m : block_mean) overall += m;
        overall /= static_cast<double>(K);
        for (std::size_t b = 0; b < K; ++b) {
            const double shift = spat_reg * (overall - block_mean[b]);
            if (shift == 0.0) continue;
            for (std::size_t j = 0; j < J; ++j) {
                auto p = swarm.params_mut(j);
                for (auto u : blocks.block(b)) {
                    double& x = p[u * D + d];
                    x = from_estimation_scale(to_estimation_scale(x, tr) + shift, tr);
                }
            }
        }
    }
}

std::vector<double> shared_unit_spread(const Swarm& swarm) {
    const auto& layout = *swarm.layout();
    const std::size_t U = layout.units(), D = layout.dim(), J = swarm.size();
    std::vector<double> out;
    for (auto d : layout.shared_columns()) {
        const auto tr = layout.entry(d).transform;
        std::vector<double> unit_mean(U, 0.0);
        for (std::size_t j = 0; j < J; ++j) {
            const auto p = swarm.params(j).values;
            for (std::size_t u = 0; u < U; ++u) unit_mean[u] += to_estimation_scale(p[u * D + d], tr);
        }
        double mean = 0.0;
        for (auto& m : unit_mean) mean += (m /= static_cast<double>(J));
        mean /= static_cast<double>(U);
        double ss = 0.0;
        for (double m : unit_mean) ss += (m - mean) * (m - mean);
        const double sd = U > 1 ? std::sqrt(ss / static_cast<double>(U - 1)) : 0.0;
        out.push_back(std::isfinite(sd) ? sd : 0.0);
    }
    return out;
}

void IbpfConfig::validate(const ParameterLayout& layout, std::size_t times) const {
    if (particles < 2) fail_usage("IBPF needs at least 2 particles");
    if (iterations < 1) fail_usage("IBPF needs at least one iteration");
    if (!(cooling > 0.0 && cooling <= 1.0)) fail_usage("cooling rate must lie in (0, 1]");
    if (!(spat_reg >= 0.0 && spat_reg <= 1.0)) fail_usage("spatial autoregression must lie in [0, 1]");
    if (blocks.units() != layout.units()) fail_usage("block partition does not cover the model's units");
    if (sigma.dim() != layout.dim() || sigma.times() != times)
        fail_usage("sigma schedule does not match the parameter layout and data length");
}

ParameterMatrix IbpfResult::estimate() const { return swarm.mean_params(); }

IbpfResult ibpf_run(const SpatPompModel& model, const PanelData& data, const IbpfConfig& config,
                    const ParameterMatrix& start, std::uint64_t seed) {
    if (!(start.layout() == *model.layout())) fail_input("starting parameters do not match the model layout");
    return ibpf_run(model, data, config, Swarm::with_particle_params(config.particles, model.state_dim(), start), seed);
}

IbpfResult ibpf_run(const SpatPompModel& model, const PanelData& data, const IbpfConfig& config, Swarm swarm,
                    std::uint64_t seed) {
    const auto& layout = *model.layout();
    config.validate(layout, model.time_grid().size());
    if (!swarm.per_particle_params()) fail_usage("IBPF needs a swarm with per-particle parameters");

    IbpfResult result{std::move(swarm), {}};
    Swarm& sw = result.swarm;
    for (std::size_t m = 1; m <= config.iterations; ++m) {
        const auto started = std::chrono::steady_clock::now();
        const double sd_mult = std::sqrt(cooling_factor(config.cooling, m));

        perturb(sw, config.sigma.column(0), sd_mult, seed, m, 0);

        SweepHooks hooks;
        hooks.before_predict = [&](std::size_t n, Swarm& s) { perturb(s, config.sigma.column(n), sd_mult, seed, m, n); };
        hooks.after_resample = [&](std::size_t, Swarm& s) { ar_correct(s, config.blocks, config.spat_reg); };

        FilterOptions options{config.blocks, seed, m, false};
        FilterResult fr;
        try {
            fr = filter_sweep(model, data, sw, options, hooks);
        } catch (const Error& e) {
            throw Error(e.category(), std::string(e.what()) + " (IBPF iteration " + std::to_string(m) + ")");
        }

        IterationRecord rec;
        rec.iteration = m;
        rec.loglik = fr.loglik;
        rec.failures = fr.failures.size();
        rec.estimate = collapse(sw.mean_params());
        rec.shared_spread = shared_unit_spread(sw);
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.trace.push_back(std::move(rec));
    }
    return result;
}

}  // namespace ibpf
