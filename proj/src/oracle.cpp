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

#include "ibpf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "ibpf/error.hpp"

namespace ibpf::oracle {

namespace {

constexpr double kRowTolerance = 1e-12;
constexpr std::size_t kMaxJoint = 1'000'000;

std::size_t symbol_of(double y, std::size_t symbols) {
    if (y < 0.0 || y != std::floor(y) || y >= static_cast<double>(symbols))
        fail_input("observation " + std::to_string(y) + " is not a symbol in 0.." + std::to_string(symbols - 1));
    return static_cast<std::size_t>(y);
}

std::size_t draw(std::span<const double> probs, double u) noexcept {
    double c = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        c += probs[i];
        if (u < c) return i;
    }
    // Rounding left a sliver above the total: take the last positive entry.
    for (std::size_t i = probs.size(); i-- > 0;)
        if (probs[i] > 0.0) return i;
    return 0;
}

void check_rows(std::span<const double> values, std::size_t width, const char* what) {
    for (std::size_t r = 0; r * width < values.size(); ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < width; ++i) {
            const double p = values[r * width + i];
            if (!(p >= 0.0)) fail_input(std::string(what) + " has a negative or NaN entry");
            s += p;
        }
        if (std::abs(s - 1.0) > kRowTolerance)
            fail_input(std::string(what) + " row " + std::to_string(r) + " sums to " + std::to_string(s));
    }
}

std::vector<double> random_simplex(std::size_t k, Rng& rng) {
    std::vector<double> p(k);
    for (auto& v : p) v = -std::log(rng.uniform());
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= s;
    return p;
}

double emission_product(const FiniteSpatHMM& hmm, const PanelData& data, std::size_t n, std::size_t joint) {
    double e = 1.0;
    for (std::size_t u = 0; u < hmm.units; ++u) {
        const double y = data(u, n);
        if (PanelData::missing(y)) continue;
        e *= hmm.emission(u, hmm.unit_state(joint, u), symbol_of(y, hmm.symbols));
    }
    return e;
}

FiniteSpatHMM empty_hmm(std::size_t units, std::size_t states, std::size_t symbols) {
    FiniteSpatHMM h;
    h.units = units;
    h.states = states;
    h.symbols = symbols;
    return h;
}

void check_data(const FiniteSpatHMM& hmm, const PanelData& data) {
    if (data.units() != hmm.units) fail_input("data has a different number of units than the HMM");
}

}  // namespace

std::size_t FiniteSpatHMM::joint_size() const noexcept {
    std::size_t n = 1;
    for (std::size_t u = 0; u < units; ++u) n *= states;
    return n;
}

std::size_t FiniteSpatHMM::unit_state(std::size_t joint, std::size_t u) const noexcept {
    for (std::size_t i = 0; i < u; ++i) joint /= states;
    return joint % states;
}

void FiniteSpatHMM::validate() const {
    if (units == 0 || states == 0 || symbols == 0) fail_input("HMM needs at least one unit, state and symbol");
    double joint = 1.0;
    for (std::size_t u = 0; u < units; ++u) joint *= static_cast<double>(states);
    if (joint > static_cast<double>(kMaxJoint))
        fail_input("joint state space of " + std::to_string(joint) + " states exceeds the 10^6 limit");
    const std::size_t J = joint_size();
    if (kernel.size() != J * J) fail_input("kernel must be " + std::to_string(J) + " x " + std::to_string(J));
    if (emissions.size() != units * states * symbols) fail_input("emission array has the wrong size");
    if (init.size() != J) fail_input("initial distribution has the wrong size");
    check_rows(kernel, J, "kernel");
    check_rows(emissions, symbols, "emission matrix");
    check_rows(init, J, "initial distribution");
}

nlohmann::json FiniteSpatHMM::to_json() const {
    return {{"units", units}, {"states", states},       {"symbols", symbols},
            {"kernel", kernel}, {"emissions", emissions}, {"init", init}};
}

FiniteSpatHMM FiniteSpatHMM::from_json(const nlohmann::json& j) {
    FiniteSpatHMM h;
    try {
        h.units = j.at("units").get<std::size_t>();
        h.states = j.at("states").get<std::size_t>();
        h.symbols = j.at("symbols").get<std::size_t>();
        h.kernel = j.at("kernel").get<std::vector<double>>();
        h.emissions = j.at("emissions").get<std::vector<double>>();
        h.init = j.at("init").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        fail_input(std::string("malformed HMM document: ") + e.what());
    }
    h.validate();
    return h;
}

FiniteSpatHMM random_coupled_hmm(std::size_t units, std::size_t states, std::size_t symbols, double coupling,
                                 std::uint64_t seed) {
    if (coupling < 0.0 || coupling > 1.0) fail_usage("coupling must lie in [0, 1]");
    auto h = empty_hmm(units, states, symbols);
    auto rng = make_rng(seed, Purpose::misc, {0x4D4D});
    // own[u][x] : row for unit u given its own state; nbr[u][x] : row given neighbour state.
    std::vector<std::vector<double>> own, nbr;
    for (std::size_t i = 0; i < units * states; ++i) own.push_back(random_simplex(states, rng));
    for (std::size_t i = 0; i < units * states; ++i) nbr.push_back(random_simplex(states, rng));
    for (std::size_t i = 0; i < units * states; ++i) {
        auto e = random_simplex(symbols, rng);
        h.emissions.insert(h.emissions.end(), e.begin(), e.end());
    }
    const std::size_t J = h.joint_size();
    h.kernel.assign(J * J, 0.0);
    for (std::size_t from = 0; from < J; ++from) {
        for (std::size_t to = 0; to < J; ++to) {
            double p = 1.0;
            for (std::size_t u = 0; u < units; ++u) {
                const std::size_t v = (u + 1) % units;
                const std::size_t xu = h.unit_state(from, u), xv = h.unit_state(from, v), yu = h.unit_state(to, u);
                p *= (1.0 - coupling) * own[u * states + xu][yu] + coupling * nbr[u * states + xv][yu];
            }
            h.kernel[from * J + to] = p;
        }
    }
    auto i0 = random_simplex(states, rng);
    h.init.assign(J, 1.0);
    for (std::size_t x = 0; x < J; ++x)
        for (std::size_t u = 0; u < units; ++u) h.init[x] *= i0[h.unit_state(x, u)];
    // Renormalize rows against product rounding so validation holds at 1e-12.
    for (std::size_t from = 0; from < J; ++from) {
        const double s = std::accumulate(h.kernel.begin() + static_cast<std::ptrdiff_t>(from * J),
                                         h.kernel.begin() + static_cast<std::ptrdiff_t>((from + 1) * J), 0.0);
        for (std::size_t to = 0; to < J; ++to) h.kernel[from * J + to] /= s;
    }
    const double si = std::accumulate(h.init.begin(), h.init.end(), 0.0);
    for (auto& p : h.init) p /= si;
    h.validate();
    return h;
}

FiniteSpatHMM random_dense_hmm(std::size_t units, std::size_t states, std::size_t symbols, std::uint64_t seed) {
    auto h = empty_hmm(units, states, symbols);
    auto rng = make_rng(seed, Purpose::misc, {0xD3D3});
    const std::size_t J = h.joint_size();
    for (std::size_t i = 0; i < J; ++i) {
        auto r = random_simplex(J, rng);
        h.kernel.insert(h.kernel.end(), r.begin(), r.end());
    }
    for (std::size_t i = 0; i < units * states; ++i) {
        auto e = random_simplex(symbols, rng);
        h.emissions.insert(h.emissions.end(), e.begin(), e.end());
    }
    h.init = random_simplex(J, rng);
    h.validate();
    return h;
}

FiniteSpatHMM marginal_hmm(const FiniteSpatHMM& hmm, std::size_t u) {
    if (u >= hmm.units) fail_usage("unit index out of range");
    auto m = empty_hmm(1, hmm.states, hmm.symbols);
    const std::size_t J = hmm.joint_size(), s = hmm.states;
    // Representative joint state with unit u at x and all others at 0.
    std::size_t stride = 1;
    for (std::size_t i = 0; i < u; ++i) stride *= s;
    m.kernel.assign(s * s, 0.0);
    for (std::size_t x = 0; x < s; ++x)
        for (std::size_t to = 0; to < J; ++to) m.kernel[x * s + hmm.unit_state(to, u)] += hmm.transition(x * stride, to);
    m.init.assign(s, 0.0);
    for (std::size_t x = 0; x < J; ++x) m.init[hmm.unit_state(x, u)] += hmm.init[x];
    m.emissions.assign(hmm.emissions.begin() + static_cast<std::ptrdiff_t>(u * s * hmm.symbols),
                       hmm.emissions.begin() + static_cast<std::ptrdiff_t>((u + 1) * s * hmm.symbols));
    for (std::size_t x = 0; x < s; ++x) {
        double t = 0.0;
        for (std::size_t y = 0; y < s; ++y) t += m.kernel[x * s + y];
        for (std::size_t y = 0; y < s; ++y) m.kernel[x * s + y] /= t;
    }
    const double si = std::accumulate(m.init.begin(), m.init.end(), 0.0);
    for (auto& p : m.init) p /= si;
    m.validate();
    return m;
}

PanelData simulate(const FiniteSpatHMM& hmm, std::size_t times, std::uint64_t seed) {
    hmm.validate();
    PanelData data(hmm.units, times);
    auto rng = make_rng(seed, Purpose::misc, {0x51A});
    const std::size_t J = hmm.joint_size();
    std::size_t x = draw(hmm.init, rng.uniform());
    for (std::size_t n = 1; n <= times; ++n) {
        x = draw(std::span<const double>(hmm.kernel).subspan(x * J, J), rng.uniform());
        for (std::size_t u = 0; u < hmm.units; ++u) {
            const auto row = std::span<const double>(hmm.emissions).subspan((u * hmm.states + hmm.unit_state(x, u)) * hmm.symbols,
                                                                             hmm.symbols);
            data(u, n) = static_cast<double>(draw(row, rng.uniform()));
        }
    }
    return data;
}

double exact_loglik(const FiniteSpatHMM& hmm, const PanelData& data) {
    hmm.validate();
    check_data(hmm, data);
    const std::size_t J = hmm.joint_size();
    std::vector<double> alpha(hmm.init), next(J);
    double loglik = 0.0;
    for (std::size_t n = 1; n <= data.times(); ++n) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t from = 0; from < J; ++from) {
            if (alpha[from] == 0.0) continue;
            for (std::size_t to = 0; to < J; ++to) next[to] += alpha[from] * hmm.transition(from, to);
        }
        double total = 0.0;
        for (std::size_t x = 0; x < J; ++x) {
            next[x] *= emission_product(hmm, data, n, x);
            total += next[x];
        }
        if (!(total > 0.0)) return -std::numeric_limits<double>::infinity();
        loglik += std::log(total);
        for (std::size_t x = 0; x < J; ++x) alpha[x] = next[x] / total;
    }
    return loglik;
}

double brute_force_loglik(const FiniteSpatHMM& hmm, const PanelData& data) {
    hmm.validate();
    check_data(hmm, data);
    const std::size_t J = hmm.joint_size(), N = data.times();
    double total = 0.0;
    std::vector<std::size_t> path(N + 1, 0);
    std::function<void(std::size_t, double)> walk = [&](std::size_t n, double p) {
        if (n > N) {
            total += p;
            return;
        }
        for (std::size_t x = 0; x < J; ++x) {
            const double step = n == 0 ? hmm.init[x] : hmm.transition(path[n - 1], x) * emission_product(hmm, data, n, x);
            if (step == 0.0) continue;
            path[n] = x;
            walk(n + 1, p * step);
        }
    };
    walk(0, 1.0);
    return std::log(total);
}

HmmModel::HmmModel(FiniteSpatHMM hmm, std::size_t times)
    : hmm_(std::move(hmm)), layout_(std::make_shared<const ParameterLayout>(std::vector<ParameterEntry>{}, hmm_.units)) {
    hmm_.validate();
    grid_.t0 = 0.0;
    grid_.dt = 1.0;
    for (std::size_t n = 1; n <= times; ++n) grid_.obs_times.push_back(static_cast<double>(n));
    grid_.validate();
}

void HmmModel::init_state(ParamsView, std::span<double> x, Rng& rng) const {
    const std::size_t joint = draw(hmm_.init, rng.uniform());
    for (std::size_t u = 0; u < hmm_.units; ++u) x[u] = static_cast<double>(hmm_.unit_state(joint, u));
}

void HmmModel::step(std::span<double> x, ParamsView, double, double, Rng& rng) const {
    const std::size_t J = hmm_.joint_size();
    std::size_t from = 0, scale = 1;
    for (std::size_t u = 0; u < hmm_.units; ++u, scale *= hmm_.states) from += static_cast<std::size_t>(x[u]) * scale;
    const std::size_t to = draw(std::span<const double>(hmm_.kernel).subspan(from * J, J), rng.uniform());
    for (std::size_t u = 0; u < hmm_.units; ++u) x[u] = static_cast<double>(hmm_.unit_state(to, u));
}

double HmmModel::meas_logdensity(std::size_t u, double y, std::span<const double> x_u, std::span<const double>) const {
    return std::log(hmm_.emission(u, static_cast<std::size_t>(x_u[0]), symbol_of(y, hmm_.symbols)));
}

double HmmModel::meas_simulate(std::size_t u, std::span<const double> x_u, std::span<const double>, Rng& rng) const {
    const auto row = std::span<const double>(hmm_.emissions)
                         .subspan((u * hmm_.states + static_cast<std::size_t>(x_u[0])) * hmm_.symbols, hmm_.symbols);
    return static_cast<double>(draw(row, rng.uniform()));
}

double plain_pf_loglik(const SpatPompModel& model, const PanelData& data, const ParameterMatrix& theta,
                       std::size_t particles, std::uint64_t seed) {
    if (particles < 2) fail_usage("the particle filter needs at least 2 particles");
    const std::size_t U = model.units(), S = model.state_dim(), J = particles, N = data.times();
    if (data.units() != U) fail_input("data has a different number of units than the model");
    if (N != model.time_grid().size()) fail_input("data length does not match the model's observation times");
    const ParamsView view{theta.values(), theta.dim()};
    const std::size_t stride = U * S;
    std::vector<double> x(J * stride), x_next(J * stride), logw(J), cum(J);
    const std::uint64_t tag = 0x9F;
    for (std::size_t j = 0; j < J; ++j) {
        auto rng = make_rng(seed, Purpose::misc, {tag, 0, j});
        model.init_state(view, std::span<double>(x).subspan(j * stride, stride), rng);
    }
    double loglik = 0.0;
    for (std::size_t n = 1; n <= N; ++n) {
        for (std::size_t j = 0; j < J; ++j) {
            auto rng = make_rng(seed, Purpose::misc, {tag, n, j});
            auto xj = std::span<double>(x).subspan(j * stride, stride);
            propagate(model, xj, view, n, rng);
            double lw = 0.0;
            for (std::size_t u = 0; u < U; ++u) {
                const double y = data(u, n);
                if (PanelData::missing(y)) continue;
                lw += model.meas_logdensity(u, y, std::span<const double>(xj).subspan(u * S, S), theta.row(u));
            }
            if (std::isnan(lw)) fail_numerical("NaN measurement density in the plain particle filter");
            logw[j] = lw;
        }
        const double top = *std::max_element(logw.begin(), logw.end());
        if (top == -std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
        double sum = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            sum += std::exp(logw[j] - top);
            cum[j] = sum;
        }
        loglik += top + std::log(sum / static_cast<double>(J));
        auto rng = make_rng(seed, Purpose::misc, {tag, n, J});
        for (std::size_t j = 0; j < J; ++j) {
            const double target = rng.uniform() * sum;
            auto k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), target) - cum.begin());
            k = std::min(k, J - 1);
            std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(k * stride), stride,
                        x_next.begin() + static_cast<std::ptrdiff_t>(j * stride));
        }
        x.swap(x_next);
    }
    return loglik;
}

}  // namespace ibpf::oracle
