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

#include "ibpf/measles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "ibpf/error.hpp"
#include "ibpf/io.hpp"

namespace ibpf::measles {

namespace {

// Params fields in declaration order.
enum Field : int { kR0, kMuEI, kMuIR, kRho, kPsi, kSigmaSE, kG, kIota, kAmplitude, kAlpha, kCohort, kPS0, kPE0, kPI0 };

struct FieldInfo {
    const char* name;
    Transform transform;
    bool ivp;
    bool unit_specific_in_a;
};

constexpr FieldInfo kFields[14] = {
    {"R0", Transform::log, false, false},         {"mu_EI", Transform::log, false, false},
    {"mu_IR", Transform::log, false, false},      {"rho", Transform::logit, false, true},
    {"psi", Transform::log, false, false},        {"sigma_SE", Transform::log, false, false},
    {"G", Transform::log, false, false},          {"iota", Transform::log, false, false},
    {"amplitude", Transform::identity, false, false}, {"alpha", Transform::log, false, false},
    {"cohort", Transform::logit, false, false},   {"pS0", Transform::logit, true, true},
    {"pE0", Transform::logit, true, true},        {"pI0", Transform::logit, true, true},
};

// Layout column order: initial values, reporting, then dynamics.
constexpr Field kLayoutOrder[] = {kPS0, kPE0, kPI0, kRho, kPsi, kMuEI, kMuIR, kR0, kSigmaSE, kAmplitude, kAlpha, kCohort};

double& field(Params& p, int f) noexcept {
    double* fields[14] = {&p.R0, &p.mu_EI, &p.mu_IR, &p.rho, &p.psi, &p.sigma_SE, &p.G,
                          &p.iota, &p.amplitude, &p.alpha, &p.cohort, &p.pS0, &p.pE0, &p.pI0};
    return *fields[f];
}

constexpr double kInvSqrt2 = 0.70710678118654752440;

// log(Phi(b) - Phi(a)) for a < b, using the tail that avoids cancellation.
double log_normal_interval(double a, double b) noexcept {
    double p;
    if (a > 0.0) {
        p = 0.5 * (std::erfc(a * kInvSqrt2) - std::erfc(b * kInvSqrt2));
    } else {
        p = 0.5 * (std::erfc(-b * kInvSqrt2) - std::erfc(-a * kInvSqrt2));
    }
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

}  // namespace

// ---------------------------------------------------------------- calendar

SchoolCalendar::SchoolCalendar(std::vector<std::pair<int, int>> holidays) : holidays_(std::move(holidays)) {
    for (const auto& [first, last] : holidays_) {
        if (first < 1 || last > 366 || first > last)
            fail_input("holiday interval [" + std::to_string(first) + ", " + std::to_string(last) +
                       "] is not within days 1..366");
        for (int d = first; d <= last; ++d) holiday_day_[static_cast<std::size_t>(d)] = true;
    }
}

SchoolCalendar SchoolCalendar::standard() {
    return SchoolCalendar({{1, 6}, {100, 115}, {200, 247}, {300, 307}, {356, 366}});
}

bool SchoolCalendar::in_term(double t) const noexcept {
    const double frac = t - std::floor(t);
    const auto day = std::min<std::size_t>(static_cast<std::size_t>(frac * kDaysPerYear) + 1, 366);
    return !holiday_day_[day];
}

double SchoolCalendar::term_fraction() const noexcept {
    double holiday = 0.0;
    for (int d = 1; d <= 366; ++d)
        if (holiday_day_[static_cast<std::size_t>(d)]) holiday += std::min(1.0, kDaysPerYear - (d - 1));
    return 1.0 - holiday / kDaysPerYear;
}

nlohmann::json SchoolCalendar::to_json() const {
    nlohmann::json h = nlohmann::json::array();
    for (const auto& [a, b] : holidays_) h.push_back({a, b});
    return {{"holidays", h}};
}

SchoolCalendar SchoolCalendar::from_json(const nlohmann::json& j) {
    std::vector<std::pair<int, int>> h;
    try {
        for (const auto& iv : j.at("holidays")) h.emplace_back(iv.at(0).get<int>(), iv.at(1).get<int>());
    } catch (const nlohmann::json::exception& e) {
        fail_input(std::string("malformed calendar: ") + e.what());
    }
    return SchoolCalendar(std::move(h));
}

double seasonal_beta(bool term, double mean_beta, double amplitude) noexcept {
    return term ? (1.0 + amplitude * (1.0 - kTermFraction) / kTermFraction) * mean_beta : (1.0 - amplitude) * mean_beta;
}

double seasonal_beta(double t, double mean_beta, double amplitude, const SchoolCalendar& calendar) noexcept {
    return seasonal_beta(calendar.in_term(t), mean_beta, amplitude);
}

// -------------------------------------------------------------- covariates

AnnualSeries::AnnualSeries(double first_year, std::vector<double> values)
    : first_year_(first_year), values_(std::move(values)) {
    if (values_.empty()) fail_input("empty annual series");
}

double AnnualSeries::at(double t) const noexcept {
    const double x = t - first_year_;
    if (x <= 0.0) return values_.front();
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= values_.size()) return values_.back();
    const double w = x - static_cast<double>(i);
    return (1.0 - w) * values_[i] + w * values_[i + 1];
}

void Covariates::validate(const TimeGrid& grid) const {
    const std::size_t U = units();
    if (U == 0) fail_input("covariates describe no units");
    if (population.size() != U || births.size() != U || distance.size() != U * U)
        fail_input("covariate tables disagree on the number of units");
    const double need_from = grid.t0 - kBirthDelay, need_to = grid.obs_times.back();
    for (std::size_t u = 0; u < U; ++u) {
        const auto& p = population[u];
        if (p.first_year() > std::floor(grid.t0) || p.last_year() < std::floor(need_to))
            fail_input("population series for " + names[u] + " does not cover the observation period");
        if (births[u].first_year() > std::floor(need_from) || births[u].last_year() < std::floor(need_to - kBirthDelay))
            fail_input("birth series for " + names[u] + " does not cover the period shifted by the birth delay");
        for (double v : p.values())
            if (!(v > 0.0)) fail_input("non-positive population for " + names[u]);
        for (double v : births[u].values())
            if (!(v >= 0.0)) fail_input("negative births for " + names[u]);
        for (std::size_t v = 0; v < U; ++v) {
            const double d = dist(u, v);
            if (u == v && d != 0.0) fail_input("distance from " + names[u] + " to itself must be 0");
            if (u != v && !(d > 0.0))
                fail_input("distance between " + names[u] + " and " + names[v] + " must be positive");
            if (d != dist(v, u)) fail_input("distance matrix is not symmetric");
        }
    }
}

Covariates Covariates::subset(std::span<const std::size_t> keep) const {
    Covariates out;
    out.calendar = calendar;
    for (auto u : keep) {
        out.names.push_back(names.at(u));
        out.population.push_back(population.at(u));
        out.births.push_back(births.at(u));
    }
    for (auto u : keep)
        for (auto v : keep) out.distance.push_back(dist(u, v));
    return out;
}

namespace {

std::vector<AnnualSeries> read_series(const std::filesystem::path& path, const char* value_column,
                                      std::vector<std::string>& names, bool define_names) {
    const auto table = io::read_csv(path);
    const auto cu = table.column("unit"), cy = table.column("year"), cv = table.column(value_column);
    std::map<std::string, std::map<int, double>> by_unit;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& name = table.rows[r][cu];
        if (define_names && !by_unit.count(name)) names.push_back(name);
        const double year = table.number(r, cy);
        if (year != std::floor(year)) table.fail(r, "year must be an integer");
        if (!by_unit[name].emplace(static_cast<int>(year), table.number(r, cv)).second)
            table.fail(r, "duplicate year for unit " + name);
    }
    std::vector<AnnualSeries> out;
    for (const auto& name : names) {
        const auto it = by_unit.find(name);
        if (it == by_unit.end()) fail_input(path.string() + ": no rows for unit " + name);
        const int first = it->second.begin()->first, last = it->second.rbegin()->first;
        if (static_cast<int>(it->second.size()) != last - first + 1)
            fail_input(path.string() + ": years for unit " + name + " are not contiguous");
        std::vector<double> v;
        for (const auto& [y, x] : it->second) v.push_back(x);
        out.emplace_back(first, std::move(v));
    }
    if (by_unit.size() != names.size()) fail_input(path.string() + ": refers to units absent from population.csv");
    return out;
}

}  // namespace

Covariates read_covariates(const std::filesystem::path& dir) {
    Covariates cov;
    cov.population = read_series(dir / "population.csv", "population", cov.names, true);
    cov.births = read_series(dir / "births.csv", "births", cov.names, false);
    const std::size_t U = cov.units();
    std::map<std::string, std::size_t> index;
    for (std::size_t u = 0; u < U; ++u) index[cov.names[u]] = u;
    cov.distance.assign(U * U, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t u = 0; u < U; ++u) cov.distance[u * U + u] = 0.0;
    const auto table = io::read_csv(dir / "distances.csv");
    const auto ca = table.column("unit_a"), cb = table.column("unit_b"), ck = table.column("km");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto a = index.find(table.rows[r][ca]), b = index.find(table.rows[r][cb]);
        if (a == index.end() || b == index.end()) table.fail(r, "unknown unit in distance row");
        const double km = table.number(r, ck);
        if (a->second == b->second) {
            if (km != 0.0) table.fail(r, "non-zero self distance");
            continue;
        }
        cov.distance[a->second * U + b->second] = km;
        cov.distance[b->second * U + a->second] = km;
    }
    for (std::size_t i = 0; i < U * U; ++i)
        if (std::isnan(cov.distance[i]))
            fail_input("distances.csv lacks the pair " + cov.names[i / U] + ", " + cov.names[i % U]);
    if (std::filesystem::exists(dir / "calendar.json")) cov.calendar = SchoolCalendar::from_json(io::read_json(dir / "calendar.json"));
    return cov;
}

void write_covariates(const Covariates& cov, const std::filesystem::path& dir) {
    std::ostringstream pop, births, dist;
    pop.precision(12);
    births.precision(12);
    dist.precision(12);
    pop << "unit,year,population\n";
    births << "unit,year,births\n";
    dist << "unit_a,unit_b,km\n";
    for (std::size_t u = 0; u < cov.units(); ++u) {
        for (std::size_t i = 0; i < cov.population[u].values().size(); ++i)
            pop << cov.names[u] << ',' << cov.population[u].first_year() + i << ',' << cov.population[u].values()[i] << '\n';
        for (std::size_t i = 0; i < cov.births[u].values().size(); ++i)
            births << cov.names[u] << ',' << cov.births[u].first_year() + i << ',' << cov.births[u].values()[i] << '\n';
        for (std::size_t v = u + 1; v < cov.units(); ++v) dist << cov.names[u] << ',' << cov.names[v] << ',' << cov.dist(u, v) << '\n';
    }
    io::write_text(dir / "population.csv", pop.str());
    io::write_text(dir / "births.csv", births.str());
    io::write_text(dir / "distances.csv", dist.str());
    io::write_json(dir / "calendar.json", cov.calendar.to_json());
}

Covariates synthetic_covariates(std::size_t units, int first_year, int last_year, std::uint64_t seed, double largest) {
    if (units == 0 || last_year < first_year) fail_usage("synthetic covariates need units and a year range");
    Covariates cov;
    auto rng = make_rng(seed, Purpose::misc, {0xC0FA});
    std::vector<double> xs, ys;
    for (std::size_t u = 0; u < units; ++u) {
        cov.names.push_back("town" + std::to_string(u + 1));
        const double base = largest * std::pow(0.6, static_cast<double>(u));
        std::vector<double> pop, births;
        for (int y = first_year; y <= last_year; ++y) {
            const double p = std::round(base * std::pow(1.003, y - first_year));
            pop.push_back(p);
            births.push_back(std::round(0.02 * p));
        }
        cov.population.emplace_back(first_year, std::move(pop));
        cov.births.emplace_back(first_year, std::move(births));
        // Keep towns at least 5 km apart.
        double x, y;
        bool ok;
        do {
            x = 250.0 * rng.uniform();
            y = 250.0 * rng.uniform();
            ok = true;
            for (std::size_t v = 0; v < xs.size(); ++v) ok = ok && std::hypot(x - xs[v], y - ys[v]) > 5.0;
        } while (!ok);
        xs.push_back(x);
        ys.push_back(y);
    }
    cov.distance.assign(units * units, 0.0);
    for (std::size_t u = 0; u < units; ++u)
        for (std::size_t v = 0; v < units; ++v)
            if (u != v) cov.distance[u * units + v] = std::round(10.0 * std::hypot(xs[u] - xs[v], ys[u] - ys[v])) / 10.0;
    return cov;
}

// ---------------------------------------------------------------- dynamics

std::vector<double> travel_matrix(std::span<const double> gravity, std::span<const double> mean_population,
                                  std::span<const double> distance) {
    const std::size_t U = mean_population.size();
    std::vector<double> v(U * U, 0.0);
    if (U < 2) return v;
    double dbar = 0.0, pbar = 0.0;
    for (std::size_t u = 0; u < U; ++u) {
        pbar += mean_population[u];
        for (std::size_t w = 0; w < U; ++w) {
            if (u == w) continue;
            if (!(distance[u * U + w] > 0.0)) fail_input("zero or negative distance between distinct units");
            dbar += distance[u * U + w];
        }
    }
    pbar /= static_cast<double>(U);
    dbar /= static_cast<double>(U * (U - 1));
    for (std::size_t u = 0; u < U; ++u)
        for (std::size_t w = 0; w < U; ++w)
            if (u != w)
                v[u * U + w] = gravity[u] * (dbar / (pbar * pbar)) * mean_population[u] * mean_population[w] / distance[u * U + w];
    return v;
}

double force_of_infection(std::size_t u, std::span<const double> infected, std::span<const double> population,
                          double iota, double alpha, std::span<const double> travel_row, double beta, double dgamma,
                          bool& clamped) noexcept {
    const double own = infected[u] / population[u];
    const double own_pow = std::pow(own, alpha);
    double bracket = std::pow((infected[u] + iota) / population[u], alpha);
    double coupling = 0.0;
    for (std::size_t w = 0; w < infected.size(); ++w) {
        if (w == u || travel_row[w] == 0.0) continue;
        coupling += travel_row[w] / population[u] * (std::pow(infected[w] / population[w], alpha) - own_pow);
    }
    bracket += coupling;
    clamped = bracket < 0.0;
    if (clamped) bracket = 0.0;
    return beta * bracket * dgamma;
}

double gamma_increment(double dt, double sigma, Rng& rng) {
    if (!(sigma > 0.0)) return dt;
    const double var = sigma * sigma;
    return std::gamma_distribution<double>(dt / var, var)(rng);
}

void euler_multinomial(long long n, std::span<const double> rates, double dt, std::span<long long> out, Rng& rng) {
    std::fill(out.begin(), out.end(), 0LL);
    double total = 0.0;
    for (double r : rates) total += r;
    if (n <= 0 || !(total > 0.0)) return;
    const double p_leave = -std::expm1(-total * dt);
    long long remaining = std::binomial_distribution<long long>(n, std::min(p_leave, 1.0))(rng);
    double remaining_rate = total;
    for (std::size_t i = 0; i + 1 < rates.size() && remaining > 0; ++i) {
        const double p = std::clamp(rates[i] / remaining_rate, 0.0, 1.0);
        out[i] = std::binomial_distribution<long long>(remaining, p)(rng);
        remaining -= out[i];
        remaining_rate -= rates[i];
    }
    out[rates.size() - 1] += remaining;
}

long long stochastic_round(double x, Rng& rng) {
    const double f = std::floor(x);
    return static_cast<long long>(f) + (rng.uniform() < x - f ? 1 : 0);
}

// ------------------------------------------------------------- measurement

double measurement_variance(double z, double rho, double psi) noexcept {
    const double v = rho * (1.0 - rho) * z + psi * psi * rho * rho * z * z;
    return z == 0.0 && rho > 0.0 ? std::max(v, 1.0) : v;
}

double dmeasure(double y, double z, double rho, double psi) {
    if (PanelData::missing(y)) return 0.0;
    if (y < 0.0) fail_input("negative case report " + std::to_string(y));
    const double mean = rho * z;
    const double var = measurement_variance(z, rho, psi);
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    if (var == 0.0) {
        // Degenerate reporting: all mass on the integer nearest rho * z.
        const bool hit = (y == 0.0 ? true : mean > y - 0.5) && mean <= y + 0.5;
        return hit ? 0.0 : ninf;
    }
    const double sd = std::sqrt(var);
    const double upper = (y + 0.5 - mean) / sd;
    const double lower = y == 0.0 ? ninf : (y - 0.5 - mean) / sd;
    return log_normal_interval(lower, upper);
}

double rmeasure(double z, double rho, double psi, Rng& rng) {
    const double mean = rho * z;
    const double var = measurement_variance(z, rho, psi);
    const double x = var == 0.0 ? mean : mean + std::sqrt(var) * std::normal_distribution<double>()(rng);
    return std::max(0.0, std::ceil(x - 0.5));
}

// --------------------------------------------------------------- submodels

Submodel parse_submodel(std::string_view tag) {
    if (tag == "A") return Submodel::A;
    if (tag == "B") return Submodel::B;
    if (tag == "C") return Submodel::C;
    fail_usage("unknown submodel '" + std::string(tag) + "' (expected A, B or C)");
}

std::string_view to_string(Submodel s) noexcept {
    switch (s) {
        case Submodel::A: return "A";
        case Submodel::B: return "B";
        case Submodel::C: return "C";
    }
    return "A";
}

Params simulation_params() {
    const double per_week = kDaysPerYear / 7.0;
    return Params{.R0 = 30.0,
                  .mu_EI = per_week,
                  .mu_IR = per_week,
                  .rho = 0.5,
                  .psi = 0.15,
                  .sigma_SE = 0.15,
                  .G = 400.0,
                  .iota = 0.0,
                  .amplitude = 0.5,
                  .alpha = 1.0,
                  .cohort = 0.0,
                  .pS0 = 0.032,
                  .pE0 = 0.00005,
                  .pI0 = 0.00004};
}

ParameterLayout submodel_layout(Submodel tag, std::size_t units) {
    std::vector<ParameterEntry> entries;
    for (auto f : kLayoutOrder) {
        const auto& info = kFields[f];
        const bool specific = tag != Submodel::A || info.unit_specific_in_a;
        entries.push_back({info.name, specific ? ParamKind::unit_specific : ParamKind::shared, info.transform, info.ivp});
    }
    const auto& coupling = kFields[tag == Submodel::C ? kIota : kG];
    entries.push_back({coupling.name, tag == Submodel::A ? ParamKind::shared : ParamKind::unit_specific,
                       coupling.transform, false});
    return ParameterLayout(std::move(entries), units);
}

std::map<std::string, double> default_sigma_overrides(double base) { return {{"alpha", 0.1 * base}}; }

Model::Model(Submodel tag, Covariates covariates, TimeGrid grid)
    : tag_(tag),
      cov_(std::move(covariates)),
      grid_(std::move(grid)),
      layout_(std::make_shared<const ParameterLayout>(submodel_layout(tag, cov_.units()))) {
    grid_.validate();
    cov_.validate(grid_);
    const std::size_t U = cov_.units();
    mean_pop_.assign(U, 0.0);
    for (std::size_t u = 0; u < U; ++u) {
        for (double t : grid_.obs_times) mean_pop_[u] += cov_.population[u].at(t);
        mean_pop_[u] /= static_cast<double>(grid_.size());
    }
    gravity_base_ = travel_matrix(std::vector<double>(U, 1.0), mean_pop_, cov_.distance);
    column_.fill(-1);
    for (std::size_t d = 0; d < layout_->dim(); ++d)
        for (int f = 0; f < 14; ++f)
            if (layout_->entry(d).name == kFields[f].name) column_[static_cast<std::size_t>(f)] = static_cast<int>(d);
}

Model::Model(const Model& o)
    : tag_(o.tag_), cov_(o.cov_), grid_(o.grid_), layout_(o.layout_), mean_pop_(o.mean_pop_),
      gravity_base_(o.gravity_base_), column_(o.column_) {}

Params Model::unpack(std::span<const double> row) const noexcept {
    Params p{};
    for (int f = 0; f < 14; ++f) {
        const int c = column_[static_cast<std::size_t>(f)];
        field(p, f) = c < 0 ? 0.0 : row[static_cast<std::size_t>(c)];
    }
    return p;
}

ParameterMatrix Model::params_matrix(const Params& p) const {
    ParameterMatrix pm(layout_);
    Params copy = p;
    for (int f = 0; f < 14; ++f) {
        const int c = column_[static_cast<std::size_t>(f)];
        if (c < 0) continue;
        for (std::size_t u = 0; u < units(); ++u) pm(u, static_cast<std::size_t>(c)) = field(copy, f);
    }
    pm.validate();
    return pm;
}

Model Model::subset(std::span<const std::size_t> keep) const { return Model(tag_, cov_.subset(keep), grid_); }

void Model::init_state(ParamsView theta, std::span<double> x, Rng&) const {
    for (std::size_t u = 0; u < units(); ++u) {
        const auto p = unpack(theta.row(u));
        if (p.pS0 + p.pE0 + p.pI0 > 1.0)
            fail_input("initial fractions for " + cov_.names[u] + " sum above 1");
        const double P = cov_.population[u].at(grid_.t0);
        auto xu = x.subspan(u * kStateDim, kStateDim);
        xu[S] = std::round(p.pS0 * P);
        xu[E] = std::round(p.pE0 * P);
        xu[I] = std::round(p.pI0 * P);
        xu[C] = 0.0;
    }
}

void Model::reset_accumulators(std::span<double> x) const {
    for (std::size_t u = 0; u < units(); ++u) x[u * kStateDim + C] = 0.0;
}

void Model::step(std::span<double> x, ParamsView theta, double t, double dt, Rng& rng) const {
    const std::size_t U = units();
    thread_local std::vector<double> infected, population, travel_row;
    infected.resize(U);
    population.resize(U);
    travel_row.resize(U);
    for (std::size_t u = 0; u < U; ++u) {
        infected[u] = x[u * kStateDim + I];
        population[u] = cov_.population[u].at(t);
    }
    const bool term = cov_.calendar.in_term(t);
    const double admission = std::floor(t) + kAdmissionDay;
    const bool cohort_entry = t <= admission && admission < t + dt;

    for (std::size_t u = 0; u < U; ++u) {
        const auto p = unpack(theta.row(u));
        const double amplitude = std::clamp(p.amplitude, 0.0, kMaxAmplitude);
        const double beta = seasonal_beta(term, p.R0 * (p.mu_IR + kDeathRate), amplitude);
        for (std::size_t w = 0; w < U; ++w) travel_row[w] = p.G * gravity_base_[u * U + w];

        const double dgamma = gamma_increment(dt, p.sigma_SE, rng);
        bool clamped = false;
        const double foi = force_of_infection(u, infected, population, p.iota, p.alpha, travel_row, beta, dgamma, clamped);
        if (clamped) clamps_.fetch_add(1, std::memory_order_relaxed);

        const double birth_rate = cov_.births[u].at(t - kBirthDelay);
        long long births = stochastic_round((1.0 - p.cohort) * birth_rate * dt, rng);
        if (cohort_entry) births += stochastic_round(p.cohort * cov_.births[u].at(admission - kBirthDelay), rng);

        auto xu = x.subspan(u * kStateDim, kStateDim);
        std::array<long long, 2> from_s{}, from_e{}, from_i{};
        const std::array<double, 2> rates_s{foi / dt, kDeathRate}, rates_e{p.mu_EI, kDeathRate},
            rates_i{p.mu_IR, kDeathRate};
        euler_multinomial(static_cast<long long>(xu[S]), rates_s, dt, from_s, rng);
        euler_multinomial(static_cast<long long>(xu[E]), rates_e, dt, from_e, rng);
        euler_multinomial(static_cast<long long>(xu[I]), rates_i, dt, from_i, rng);

        xu[S] += static_cast<double>(births - from_s[0] - from_s[1]);
        xu[E] += static_cast<double>(from_s[0] - from_e[0] - from_e[1]);
        xu[I] += static_cast<double>(from_e[0] - from_i[0] - from_i[1]);
        xu[C] += static_cast<double>(from_i[0]);
        if (xu[S] < 0.0 || xu[E] < 0.0 || xu[I] < 0.0)
            throw Error(ErrorCategory::internal, "negative compartment in unit " + cov_.names[u]);
    }
}

double Model::meas_logdensity(std::size_t, double y, std::span<const double> x_u, std::span<const double> theta_u) const {
    return dmeasure(y, x_u[C], theta_u[static_cast<std::size_t>(column_[kRho])],
                    theta_u[static_cast<std::size_t>(column_[kPsi])]);
}

double Model::meas_simulate(std::size_t, std::span<const double> x_u, std::span<const double> theta_u, Rng& rng) const {
    return rmeasure(x_u[C], theta_u[static_cast<std::size_t>(column_[kRho])],
                    theta_u[static_cast<std::size_t>(column_[kPsi])], rng);
}

}  // namespace ibpf::measles
