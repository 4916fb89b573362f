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

#include <cmath>
#include <memory>
#include <vector>

#include "ibpf/model.hpp"

namespace ibpf::testing {

/// Deterministic counter state; unit u's measurement density is the fixed
/// value density[u] regardless of state or observation.
class FixedDensityModel final : public SpatPompModel {
public:
    FixedDensityModel(std::vector<double> density, std::size_t times)
        : density_(std::move(density)),
          layout_(std::make_shared<const ParameterLayout>(std::vector<ParameterEntry>{}, density_.size())) {
        for (std::size_t n = 1; n <= times; ++n) grid_.obs_times.push_back(static_cast<double>(n));
    }

    std::size_t units() const noexcept override { return density_.size(); }
    std::size_t state_dim() const noexcept override { return 1; }
    std::vector<std::string> state_names() const override { return {"k"}; }
    const LayoutPtr& layout() const noexcept override { return layout_; }
    const TimeGrid& time_grid() const noexcept override { return grid_; }

    void init_state(ParamsView, std::span<double> x, Rng&) const override {
        for (auto& v : x) v = 0.0;
    }
    void step(std::span<double> x, ParamsView, double, double, Rng&) const override {
        for (auto& v : x) v += 1.0;
    }
    double meas_logdensity(std::size_t u, double, std::span<const double>, std::span<const double>) const override {
        return std::log(density_[u]);
    }
    double meas_simulate(std::size_t, std::span<const double> x_u, std::span<const double>, Rng&) const override {
        return x_u[0];
    }
    ParameterMatrix no_params() const { return ParameterMatrix(layout_); }

private:
    std::vector<double> density_;
    TimeGrid grid_;
    LayoutPtr layout_;
};

/// Independent Gaussian random walks X_u(n) = X_u(n-1) + N(0, q) observed with
/// N(0, r) error. Parameters: shared log-scale "q", unit-specific log-scale "r".
class GaussianWalkModel final : public SpatPompModel {
public:
    GaussianWalkModel(std::size_t units, std::size_t times)
        : layout_(std::make_shared<const ParameterLayout>(
              std::vector<ParameterEntry>{{"q", ParamKind::shared, Transform::log, false},
                                          {"r", ParamKind::unit_specific, Transform::log, false},
                                          {"x0", ParamKind::shared, Transform::identity, true}},
              units)) {
        for (std::size_t n = 1; n <= times; ++n) grid_.obs_times.push_back(static_cast<double>(n));
    }

    std::size_t units() const noexcept override { return layout_->units(); }
    std::size_t state_dim() const noexcept override { return 1; }
    std::vector<std::string> state_names() const override { return {"x"}; }
    const LayoutPtr& layout() const noexcept override { return layout_; }
    const TimeGrid& time_grid() const noexcept override { return grid_; }

    void init_state(ParamsView theta, std::span<double> x, Rng&) const override {
        for (std::size_t u = 0; u < units(); ++u) x[u] = theta.row(u)[2];
    }
    void step(std::span<double> x, ParamsView theta, double, double, Rng& rng) const override {
        for (std::size_t u = 0; u < units(); ++u) x[u] += std::sqrt(theta.row(u)[0]) * normal(rng);
    }
    double meas_logdensity(std::size_t, double y, std::span<const double> x_u,
                           std::span<const double> theta_u) const override {
        const double r = theta_u[1], d = y - x_u[0];
        return -0.5 * (std::log(2.0 * M_PI * r) + d * d / r);
    }
    double meas_simulate(std::size_t, std::span<const double> x_u, std::span<const double> theta_u,
                         Rng& rng) const override {
        return x_u[0] + std::sqrt(theta_u[1]) * normal(rng);
    }

private:
    static double normal(Rng& rng) {
        const double u1 = rng.uniform(), u2 = rng.uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    TimeGrid grid_;
    LayoutPtr layout_;
};

/// Kalman filter log-likelihood of one unit of GaussianWalkModel.
inline double kalman_loglik(std::span<const double> y, double q, double r, double x0) {
    double m = x0, p = 0.0, ll = 0.0;
    for (double obs : y) {
        p += q;
        const double s = p + r, d = obs - m;
        ll += -0.5 * (std::log(2.0 * M_PI * s) + d * d / s);
        const double k = p / s;
        m += k * d;
        p *= 1.0 - k;
    }
    return ll;
}

}  // namespace ibpf::testing
