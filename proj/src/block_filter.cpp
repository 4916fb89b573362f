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

#include "ibpf/block_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "ibpf/error.hpp"
#include "ibpf/parallel.hpp"

namespace ibpf {

Swarm::Swarm(std::size_t particles, std::size_t state_dim, LayoutPtr layout, bool per_particle)
    : particles_(particles), state_dim_(state_dim), layout_(std::move(layout)), per_particle_(per_particle) {
    if (particles_ == 0) fail_usage("a swarm needs at least one particle");
    states_.assign(particles_ * units() * state_dim_, 0.0);
}

Swarm Swarm::with_fixed_params(std::size_t particles, std::size_t state_dim, ParameterMatrix theta) {
    Swarm s(particles, state_dim, theta.layout_ptr(), false);
    s.params_.assign(theta.values().begin(), theta.values().end());
    return s;
}

Swarm Swarm::with_particle_params(std::size_t particles, std::size_t state_dim, const ParameterMatrix& theta) {
    Swarm s(particles, state_dim, theta.layout_ptr(), true);
    s.params_.reserve(particles * theta.values().size());
    for (std::size_t j = 0; j < particles; ++j)
        s.params_.insert(s.params_.end(), theta.values().begin(), theta.values().end());
    return s;
}

ParameterMatrix Swarm::particle_params(std::size_t j) const {
    const auto v = params(j).values;
    return ParameterMatrix(layout_, std::vector<double>(v.begin(), v.end()));
}

ParameterMatrix Swarm::mean_params() const {
    const std::size_t n = units() * param_dim();
    if (!per_particle_) return particle_params(0);
    std::vector<double> sum(n, 0.0), est(n);
    for (std::size_t j = 0; j < particles_; ++j) {
        to_estimation_scale(params(j).values, *layout_, est);
        for (std::size_t i = 0; i < n; ++i) sum[i] += est[i];
    }
    for (auto& s : sum) s /= static_cast<double>(particles_);
    // Columns pinned at a transform boundary average to inf - inf otherwise.
    for (std::size_t i = 0; i < n; ++i)
        if (std::isnan(sum[i])) sum[i] = to_estimation_scale(params(0).values[i], layout_->entry(i % param_dim()).transform);
    return from_estimation_scale(sum, layout_);
}

void Swarm::resample_block(std::span<const std::size_t> block, std::span<const std::size_t> ancestors) {
    const std::size_t S = state_dim_, D = param_dim(), U = units();
    next_states_.resize(states_.size());
    if (per_particle_) next_params_.resize(params_.size());
    for (std::size_t j = 0; j < particles_; ++j) {
        const std::size_t a = ancestors[j];
        for (auto u : block) {
            std::copy_n(states_.begin() + static_cast<std::ptrdiff_t>((a * U + u) * S), S,
                        next_states_.begin() + static_cast<std::ptrdiff_t>((j * U + u) * S));
            if (per_particle_)
                std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>((a * U + u) * D), D,
                            next_params_.begin() + static_cast<std::ptrdiff_t>((j * U + u) * D));
        }
    }
}

void Swarm::commit_resample() {
    states_.swap(next_states_);
    if (per_particle_) params_.swap(next_params_);
}

nlohmann::json FilterResult::to_json() const {
    nlohmann::json failures_json = nlohmann::json::array();
    for (const auto& f : failures) failures_json.push_back({{"n", f.n}, {"block", f.block + 1}});
    auto finite_or_null = [](const std::vector<double>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
        return a;
    };
    nlohmann::json j{{"loglik", loglik},
                     {"times", times},
                     {"blocks", blocks},
                     {"cond_loglik", finite_or_null(cond_loglik)},
                     {"ess", ess},
                     {"failures", failures_json}};
    if (!filter_mean.empty()) j["filter_mean"] = finite_or_null(filter_mean);
    return j;
}

void FilterResult::write_csv(std::ostream& os) const {
    os << "n,block,cond_loglik,ess\n";
    const auto old = os.precision(17);
    for (std::size_t n = 1; n <= times; ++n)
        for (std::size_t b = 0; b < blocks; ++b) os << n << ',' << b + 1 << ',' << cond(n, b) << ',' << ess_at(n, b) << '\n';
    os.precision(old);
}

double log_mean_exp(std::span<const double> v) noexcept {
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s / static_cast<double>(v.size()));
}

std::vector<double> block_log_weights(const SpatPompModel& model, const PanelData& data, std::size_t n,
                                      std::span<const std::size_t> block, const Swarm& swarm) {
    const std::size_t S = model.state_dim();
    std::vector<double> lw(swarm.size(), 0.0);
    parallel_for(swarm.size(), [&](std::size_t j) {
        const auto x = swarm.state(j);
        const auto theta = swarm.params(j);
        double sum = 0.0;
        for (auto u : block) {
            const double y = data(u, n);
            if (PanelData::missing(y)) continue;
            const double ld = model.meas_logdensity(u, y, x.subspan(u * S, S), theta.row(u));
            if (std::isnan(ld)) {
                std::ostringstream os;
                os << "measurement density is NaN for particle " << j + 1 << ", unit " << u + 1 << ", time " << n;
                fail_numerical(os.str());
            }
            sum += ld;
        }
        lw[j] = sum;
    });
    return lw;
}

BlockResample resample_block(std::span<const double> log_weights, Rng& rng) {
    const std::size_t J = log_weights.size();
    BlockResample out;
    out.ancestors.resize(J);
    const double mx = J ? *std::max_element(log_weights.begin(), log_weights.end()) : -INFINITY;
    const double offset = rng.uniform();
    if (!std::isfinite(mx)) {
        // Filtering failure: every particle is impossible. Keep the swarm
        // alive with uniform selection and a floored contribution.
        for (std::size_t j = 0; j < J; ++j) out.ancestors[j] = j;
        out.cond_loglik = kFailureLogLik;
        out.ess = static_cast<double>(J);
        out.failed = true;
        return out;
    }
    std::vector<double> w(J);
    double sum = 0.0;
    for (std::size_t j = 0; j < J; ++j) sum += (w[j] = std::exp(log_weights[j] - mx));
    double sum_sq = 0.0;
    for (auto& x : w) {
        x /= sum;
        sum_sq += x * x;
    }
    out.cond_loglik = mx + std::log(sum / static_cast<double>(J));
    out.ess = std::clamp(1.0 / sum_sq, 1.0, static_cast<double>(J));

    // Rounding in the running sum must not push selection onto a trailing
    // zero-weight particle.
    std::size_t last = J - 1;
    while (last > 0 && w[last] == 0.0) --last;
    const double step = 1.0 / static_cast<double>(J);
    double cumulative = w[0];
    std::size_t k = 0;
    for (std::size_t j = 0; j < J; ++j) {
        const double position = (static_cast<double>(j) + offset) * step;
        while (position > cumulative && k < last) cumulative += w[++k];
        out.ancestors[j] = k;
    }
    return out;
}

FilterResult filter_sweep(const SpatPompModel& model, const PanelData& data, Swarm& swarm,
                          const FilterOptions& options, const SweepHooks& hooks) {
    const auto& grid = model.time_grid();
    const std::size_t N = grid.size(), U = model.units(), S = model.state_dim(), J = swarm.size();
    const auto& blocks = options.blocks;
    if (data.units() != U || data.times() != N) {
        std::ostringstream os;
        os << "data are " << data.units() << "x" << data.times() << " but the model expects " << U << "x" << N;
        fail_input(os.str());
    }
    if (blocks.units() != U) fail_input("block partition does not cover the model's units");
    if (swarm.units() != U || swarm.state_dim() != S) fail_input("swarm does not match the model dimensions");

    FilterResult result;
    result.times = N;
    result.blocks = blocks.size();
    result.cond_loglik.assign(N * blocks.size(), 0.0);
    result.ess.assign(N * blocks.size(), 0.0);
    if (options.filter_mean) result.filter_mean.assign(N * U * S, 0.0);

    parallel_for(J, [&](std::size_t j) {
        auto rng = make_rng(options.seed, Purpose::init, {options.iteration, j});
        model.init_state(swarm.params(j), swarm.state(j), rng);
    });

    for (std::size_t n = 1; n <= N; ++n) {
        if (hooks.before_predict) hooks.before_predict(n, swarm);

        parallel_for(J, [&](std::size_t j) {
            auto rng = make_rng(options.seed, Purpose::step, {options.iteration, n, j});
            try {
                propagate(model, swarm.state(j), swarm.params(j), n, rng);
            } catch (const Error& e) {
                std::ostringstream os;
                os << e.what() << " (time " << n << ", particle " << j + 1 << ")";
                throw Error(e.category(), os.str());
            }
        });

        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const auto block = blocks.block(b);
            const auto lw = block_log_weights(model, data, n, block, swarm);
            auto rng = make_rng(options.seed, Purpose::resample, {options.iteration, n, b});
            const auto rs = resample_block(lw, rng);
            result.cond_loglik[(n - 1) * blocks.size() + b] = rs.cond_loglik;
            result.ess[(n - 1) * blocks.size() + b] = rs.ess;
            if (rs.failed) result.failures.push_back({n, b});

            if (options.filter_mean) {
                const double mx = *std::max_element(lw.begin(), lw.end());
                double total = 0.0;
                std::vector<double> w(J, 1.0);
                if (std::isfinite(mx))
                    for (std::size_t j = 0; j < J; ++j) w[j] = std::exp(lw[j] - mx);
                for (double x : w) total += x;
                for (auto u : block)
                    for (std::size_t s = 0; s < S; ++s) {
                        double m = 0.0;
                        for (std::size_t j = 0; j < J; ++j) m += w[j] * swarm.state(j)[u * S + s];
                        result.filter_mean[((n - 1) * U + u) * S + s] = m / total;
                    }
            }
            swarm.resample_block(block, rs.ancestors);
        }
        swarm.commit_resample();

        if (hooks.after_resample) hooks.after_resample(n, swarm);
    }

    for (double c : result.cond_loglik) result.loglik += c;
    return result;
}

FilterResult bpf_run(const SpatPompModel& model, const PanelData& data, const ParameterMatrix& theta,
                     std::size_t particles, const FilterOptions& options) {
    if (!(theta.layout() == *model.layout())) fail_input("parameter layout does not match the model");
    auto swarm = Swarm::with_fixed_params(particles, model.state_dim(), theta);
    return filter_sweep(model, data, swarm, options);
}

}  // namespace ibpf
