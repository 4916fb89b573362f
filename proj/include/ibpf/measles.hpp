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

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ibpf/model.hpp"

/// Stochastic SEIR metapopulation model for weekly measles case reports.
/// Time is measured in years; all rates are per year.
namespace ibpf::measles {

inline constexpr double kTermFraction = 0.759;
inline constexpr double kBirthDelay = 4.0;
inline constexpr double kDeathRate = 1.0 / 50.0;
inline constexpr double kAdmissionDay = 252.0 / 365.0;
inline constexpr double kDaysPerYear = 365.25;
inline constexpr double kWeek = 7.0 / kDaysPerYear;
inline constexpr double kMaxAmplitude = 1.0 - 1e-6;

/// Holiday periods as inclusive day-of-year ranges. Day k of a year covers
/// [k-1, k) days after the year boundary; day 366 is the final quarter day.
class SchoolCalendar {
public:
    explicit SchoolCalendar(std::vector<std::pair<int, int>> holidays);
    static SchoolCalendar standard();

    bool in_term(double t) const noexcept;
    /// Exact proportion of the year not covered by holidays.
    double term_fraction() const noexcept;
    const std::vector<std::pair<int, int>>& holidays() const noexcept { return holidays_; }

    nlohmann::json to_json() const;
    static SchoolCalendar from_json(const nlohmann::json& j);

private:
    std::vector<std::pair<int, int>> holidays_;
    std::array<bool, 367> holiday_day_{};
};

/// Transmission rate at a point of the school year.
double seasonal_beta(bool term, double mean_beta, double amplitude) noexcept;
double seasonal_beta(double t, double mean_beta, double amplitude, const SchoolCalendar& calendar) noexcept;

/// Annual values at integer years, linearly interpolated and held constant
/// beyond either end.
class AnnualSeries {
public:
    AnnualSeries() = default;
    AnnualSeries(double first_year, std::vector<double> values);

    double at(double t) const noexcept;
    double first_year() const noexcept { return first_year_; }
    double last_year() const noexcept { return first_year_ + static_cast<double>(values_.size()) - 1.0; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    double first_year_ = 0.0;
    std::vector<double> values_;
};

struct Covariates {
    std::vector<std::string> names;
    std::vector<AnnualSeries> population;
    std::vector<AnnualSeries> births;  // births per year
    std::vector<double> distance;      // U x U, km
    SchoolCalendar calendar = SchoolCalendar::standard();

    std::size_t units() const noexcept { return names.size(); }
    double dist(std::size_t u, std::size_t v) const noexcept { return distance[u * units() + v]; }

    /// Checks symmetry and positivity, and that the series cover the grid
    /// including the birth delay.
    void validate(const TimeGrid& grid) const;
    Covariates subset(std::span<const std::size_t> units) const;
};

/// Reads population.csv, births.csv, distances.csv and optional calendar.json.
Covariates read_covariates(const std::filesystem::path& dir);
void write_covariates(const Covariates& cov, const std::filesystem::path& dir);

/// Deterministic synthetic towns for desk-scale experiments: populations
/// spread geometrically below `largest`, birth rate 20 per 1000 per year,
/// locations uniform on a 250 km square.
Covariates synthetic_covariates(std::size_t units, int first_year, int last_year, std::uint64_t seed,
                                double largest = 5e5);

/// Gravity travel volumes v_uv = G_u * (dbar / pbar^2) * p_u p_v / d_uv, with
/// zero diagonal. `gravity` holds one constant per unit.
std::vector<double> travel_matrix(std::span<const double> gravity, std::span<const double> mean_population,
                                  std::span<const double> distance);

/// Expected S->E hazard increment mu_SE * dt over one step, given the gamma
/// noise increment `dgamma` (mean dt). Sets `clamped` when the coupling
/// bracket went negative and was clamped to zero.
double force_of_infection(std::size_t u, std::span<const double> infected, std::span<const double> population,
                          double iota, double alpha, std::span<const double> travel_row, double beta, double dgamma,
                          bool& clamped) noexcept;

/// Gamma white-noise increment with mean dt and variance sigma^2 dt.
double gamma_increment(double dt, double sigma, Rng& rng);

/// Competing-hazards draw: how many of `n` individuals leave along each of
/// the given hazards during dt.
void euler_multinomial(long long n, std::span<const double> rates, double dt, std::span<long long> out, Rng& rng);

/// Rounds x up with probability frac(x).
long long stochastic_round(double x, Rng& rng);

/// log P[Y = y | Z = z] under the discretized Gaussian reporting model.
/// Missing y (NaN) has log-probability 0.
double dmeasure(double y, double z, double rho, double psi);
double rmeasure(double z, double rho, double psi, Rng& rng);
/// Reporting variance, floored at 1 when z = 0 and rho > 0.
double measurement_variance(double z, double rho, double psi) noexcept;

enum class Submodel { A, B, C };
Submodel parse_submodel(std::string_view tag);
std::string_view to_string(Submodel s) noexcept;

/// Full parameter set for one unit; G and iota are fixed at zero where the
/// submodel does not estimate them.
struct Params {
    double R0, mu_EI, mu_IR, rho, psi, sigma_SE, G, iota, amplitude, alpha, cohort, pS0, pE0, pI0;
};

/// Values used to simulate the reference data set (weekly rates converted
/// to per-year).
Params simulation_params();

ParameterLayout submodel_layout(Submodel tag, std::size_t units);

/// Per-name random-walk sd overrides: the mixing exponent walks at 0.1 x base.
std::map<std::string, double> default_sigma_overrides(double base);

class Model final : public SpatPompModel {
public:
    enum State : std::size_t { S = 0, E = 1, I = 2, C = 3, kStateDim = 4 };

    Model(Submodel tag, Covariates covariates, TimeGrid grid);
    Model(const Model& other);

    std::size_t units() const noexcept override { return cov_.units(); }
    std::size_t state_dim() const noexcept override { return kStateDim; }
    std::vector<std::string> state_names() const override { return {"S", "E", "I", "C"}; }
    const LayoutPtr& layout() const noexcept override { return layout_; }
    const TimeGrid& time_grid() const noexcept override { return grid_; }

    void init_state(ParamsView theta, std::span<double> x, Rng& rng) const override;
    void step(std::span<double> x, ParamsView theta, double t, double dt, Rng& rng) const override;
    void reset_accumulators(std::span<double> x) const override;
    double meas_logdensity(std::size_t u, double y, std::span<const double> x_u,
                           std::span<const double> theta_u) const override;
    double meas_simulate(std::size_t u, std::span<const double> x_u, std::span<const double> theta_u,
                         Rng& rng) const override;

    Submodel submodel() const noexcept { return tag_; }
    const Covariates& covariates() const noexcept { return cov_; }
    const std::vector<double>& mean_population() const noexcept { return mean_pop_; }

    Params unpack(std::span<const double> row) const noexcept;
    /// Matrix holding `p` in every unit.
    ParameterMatrix params_matrix(const Params& p) const;

    /// Restriction to a subset of units (same submodel and time grid).
    Model subset(std::span<const std::size_t> units) const;

    std::uint64_t clamp_events() const noexcept { return clamps_.load(std::memory_order_relaxed); }

private:
    Submodel tag_;
    Covariates cov_;
    TimeGrid grid_;
    LayoutPtr layout_;
    std::vector<double> mean_pop_;
    std::vector<double> gravity_base_;  // travel_matrix with G = 1
    std::array<int, 14> column_{};     // Params field -> layout column, -1 when fixed at 0
    mutable std::atomic<std::uint64_t> clamps_{0};
};

}  // namespace ibpf::measles
