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

#include "ibpf/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ibpf/error.hpp"
#include "ibpf/io.hpp"

namespace ibpf::workflow {

namespace {

constexpr std::uint64_t kEvalStream = 0xEA1;

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail_usage(std::string("config key '") + key + "': " + e.what());
    }
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

EvalSummary eval_from_json(const nlohmann::json& j) {
    EvalSummary e;
    e.logliks = j.at("logliks").get<std::vector<double>>();
    e.mean = j.at("mean").get<double>();
    e.se = j.at("se").get<double>();
    e.log_mean_exp = j.at("log_mean_exp").get<double>();
    e.failures = j.value("failures", std::size_t{0});
    return e;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known{"J",      "M",         "a",         "spat_reg", "sigma",
                                                "sigma_overrides", "blocks", "eval_J", "eval_reps",
                                                "eval_start", "jitter", "q",        "k",        "spat_reg_grid",
                                                "units",  "weeks",     "t0"};
    if (!j.is_object()) fail_usage("config document must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end()) fail_usage("unknown config key '" + key + "'");
    RunConfig rc;
    take(j, "J", rc.particles);
    take(j, "M", rc.iterations);
    take(j, "a", rc.cooling);
    take(j, "spat_reg", rc.spat_reg);
    take(j, "sigma", rc.sigma);
    take(j, "sigma_overrides", rc.sigma_overrides);
    if (j.contains("blocks")) rc.blocks = j.at("blocks");
    take(j, "eval_J", rc.eval_particles);
    take(j, "eval_reps", rc.eval_reps);
    take(j, "eval_start", rc.eval_start);
    take(j, "jitter", rc.jitter);
    take(j, "q", rc.quantile);
    take(j, "k", rc.copies);
    take(j, "spat_reg_grid", rc.spat_reg_grid);
    take(j, "units", rc.units);
    take(j, "weeks", rc.weeks);
    take(j, "t0", rc.t0);
    if (rc.eval_particles < 2 || rc.eval_reps < 1) fail_usage("eval_J must be at least 2 and eval_reps at least 1");
    if (!(rc.jitter >= 0.0)) fail_usage("jitter must be non-negative");
    if (!(rc.quantile > 0.0 && rc.quantile <= 1.0) || rc.copies < 1) fail_usage("refinement needs 0 < q <= 1 and k >= 1");
    if (rc.units < 1 || rc.weeks < 1) fail_usage("units and weeks must be positive");
    return rc;
}

nlohmann::json RunConfig::to_json() const {
    return {{"J", particles},       {"M", iterations},           {"a", cooling},
            {"spat_reg", spat_reg}, {"sigma", sigma},            {"sigma_overrides", sigma_overrides},
            {"blocks", blocks},     {"eval_J", eval_particles},  {"eval_reps", eval_reps},
            {"eval_start", eval_start}, {"jitter", jitter},      {"q", quantile},
            {"k", copies},          {"spat_reg_grid", spat_reg_grid}, {"units", units},
            {"weeks", weeks},       {"t0", t0}};
}

std::vector<std::string> flat_names(const ParameterLayout& layout) {
    std::vector<std::string> names;
    for (auto d : layout.shared_columns()) names.push_back(layout.entry(d).name);
    for (std::size_t u = 0; u < layout.units(); ++u)
        for (auto d : layout.unit_specific_columns()) names.push_back(layout.entry(d).name + "_" + std::to_string(u + 1));
    return names;
}

PanelData simulate_panel(const SpatPompModel& model, const ParameterMatrix& theta, std::uint64_t seed) {
    theta.validate();
    const std::size_t U = model.units(), S = model.state_dim(), N = model.time_grid().size();
    const ParamsView view{theta.values(), theta.dim()};
    std::vector<double> x(U * S);
    auto init = make_rng(seed, Purpose::init, {0});
    model.init_state(view, x, init);
    PanelData data(U, N);
    for (std::size_t n = 1; n <= N; ++n) {
        auto step = make_rng(seed, Purpose::step, {n});
        propagate(model, x, view, n, step);
        auto meas = make_rng(seed, Purpose::measure, {n});
        for (std::size_t u = 0; u < U; ++u)
            data(u, n) = model.meas_simulate(u, std::span<const double>(x).subspan(u * S, S), theta.row(u), meas);
    }
    return data;
}

nlohmann::json EvalSummary::to_json() const {
    return {{"mean", mean}, {"se", se}, {"log_mean_exp", log_mean_exp}, {"failures", failures}, {"logliks", logliks}};
}

EvalSummary evaluate(const SpatPompModel& model, const PanelData& data, const ParameterMatrix& theta,
                     std::size_t particles, std::size_t reps, const BlockPartition& blocks, std::uint64_t seed) {
    if (reps < 1) fail_usage("evaluation needs at least one replicate");
    EvalSummary e;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto res = bpf_run(model, data, theta, particles, FilterOptions{blocks, derive_seed(seed, r), 0, false});
        e.logliks.push_back(res.loglik);
        e.failures += res.failures.size();
    }
    const double n = static_cast<double>(reps);
    e.mean = std::accumulate(e.logliks.begin(), e.logliks.end(), 0.0) / n;
    if (reps > 1) {
        double ss = 0.0;
        for (double l : e.logliks) ss += (l - e.mean) * (l - e.mean);
        e.se = std::sqrt(ss / (n - 1.0) / n);
    }
    e.log_mean_exp = log_mean_exp(e.logliks);
    return e;
}

ParameterMatrix jitter(const ParameterMatrix& base, double half_width, std::uint64_t seed) {
    const auto& layout = base.layout();
    auto flat = collapse(base);
    auto rng = make_rng(seed, Purpose::jitter, {});
    std::vector<Transform> transforms;
    for (auto d : layout.shared_columns()) transforms.push_back(layout.entry(d).transform);
    for (std::size_t u = 0; u < layout.units(); ++u)
        for (auto d : layout.unit_specific_columns()) transforms.push_back(layout.entry(d).transform);
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double noise = half_width * (2.0 * rng.uniform() - 1.0);
        const double est = to_estimation_scale(flat[i], transforms[i]);
        if (std::isfinite(est)) flat[i] = from_estimation_scale(est + noise, transforms[i]);
    }
    return expand_shared(flat, base.layout_ptr());
}

std::vector<std::size_t> select_parents(std::span<const double> scores, double quantile) {
    if (!(quantile > 0.0 && quantile <= 1.0)) fail_usage("selection quantile must lie in (0, 1]");
    std::vector<std::size_t> finite;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (std::isfinite(scores[i])) finite.push_back(i);
    const auto want = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(scores.size()) - 1e-9));
    if (finite.empty() || want == 0) fail_input("no completed replicates to select parents from");
    std::stable_sort(finite.begin(), finite.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    finite.resize(std::min(want, finite.size()));
    return finite;
}

BlockPartition make_blocks(std::size_t units, const nlohmann::json& spec) { return BlockPartition::from_json(units, spec); }

IbpfConfig make_ibpf_config(const RunConfig& rc, const ParameterLayout& layout, std::size_t times,
                            const std::map<std::string, double>& model_overrides) {
    auto overrides = model_overrides;
    for (const auto& [k, v] : rc.sigma_overrides) overrides[k] = v;
    IbpfConfig c;
    c.particles = rc.particles;
    c.iterations = rc.iterations;
    c.cooling = rc.cooling;
    c.spat_reg = rc.spat_reg;
    c.blocks = make_blocks(layout.units(), rc.blocks);
    c.sigma = build_sigma_schedule(layout, rc.sigma, times, overrides);
    c.validate(layout, times);
    return c;
}

ReplicateOutcome run_replicate(const SpatPompModel& model, const PanelData& data, const RunConfig& rc,
                               const IbpfConfig& config, const ParameterMatrix& start, std::size_t index,
                               std::uint64_t seed) {
    ReplicateOutcome out;
    out.index = index;
    out.seed = seed;
    out.start = start;
    const std::uint64_t eval_seed = derive_seed(seed, kEvalStream);
    try {
        // Start and final evaluations share streams so their difference is
        // not inflated by independent Monte Carlo noise.
        if (rc.eval_start)
            out.start_eval = evaluate(model, data, start, rc.eval_particles, rc.eval_reps, config.blocks, eval_seed);
        auto result = ibpf_run(model, data, config, start, seed);
        out.trace = std::move(result.trace);
        out.final = result.estimate();
        out.final_eval = evaluate(model, data, *out.final, rc.eval_particles, rc.eval_reps, config.blocks, eval_seed);
        out.ok = true;
    } catch (const Error& e) {
        out.error = std::string(to_string(e.category())) + ": " + e.what();
    } catch (const std::exception& e) {
        out.error = std::string("internal: ") + e.what();
    }
    return out;
}

void write_replicate_files(const ReplicateOutcome& r, const std::filesystem::path& dir) {
    std::ostringstream trace, timing, params, spread;
    trace << "iteration,loglik,failures\n";
    timing << "iteration,wall_seconds\n";
    const LayoutPtr& layout = r.start->layout_ptr();
    params << "iteration";
    for (const auto& n : flat_names(*layout)) params << ',' << n;
    params << '\n';
    spread << "iteration";
    for (auto d : layout->shared_columns()) spread << ',' << layout->entry(d).name;
    spread << '\n';
    for (const auto& rec : r.trace) {
        trace << rec.iteration << ',' << fmt(rec.loglik) << ',' << rec.failures << '\n';
        timing << rec.iteration << ',' << fmt(rec.wall_seconds) << '\n';
        params << rec.iteration;
        for (double v : rec.estimate) params << ',' << fmt(v);
        params << '\n';
        spread << rec.iteration;
        for (double v : rec.shared_spread) spread << ',' << fmt(v);
        spread << '\n';
    }
    io::write_text(dir / "trace.csv", trace.str());
    io::write_text(dir / "timing.csv", timing.str());
    io::write_text(dir / "params.csv", params.str());
    io::write_text(dir / "spread.csv", spread.str());
}

std::vector<double> SearchRound::scores() const {
    std::vector<double> s;
    for (const auto& r : replicates)
        s.push_back(r.ok && r.final_eval ? r.final_eval->mean : -std::numeric_limits<double>::infinity());
    return s;
}

nlohmann::json SearchRound::to_json() const {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : replicates) {
        nlohmann::json j{{"replicate", r.index + 1}, {"seed", r.seed}, {"ok", r.ok}};
        j["parent"] = r.parent ? nlohmann::json(*r.parent + 1) : nlohmann::json(nullptr);
        if (!r.ok) j["error"] = r.error;
        if (r.start) j["start"] = ibpf::to_json(*r.start);
        if (r.final) j["final"] = ibpf::to_json(*r.final);
        if (r.start_eval) j["start_eval"] = r.start_eval->to_json();
        if (r.final_eval) j["final_eval"] = r.final_eval->to_json();
        if (!r.trace.empty()) j["final_search_loglik"] = r.trace.back().loglik;
        reps.push_back(std::move(j));
    }
    return {{"round", round}, {"quantile", quantile}, {"copies", copies}, {"replicates", std::move(reps)}};
}

SearchRound SearchRound::from_json(const nlohmann::json& j, const LayoutPtr& layout) {
    SearchRound s;
    try {
        s.round = j.at("round").get<std::size_t>();
        s.quantile = j.at("quantile").get<double>();
        s.copies = j.at("copies").get<std::size_t>();
        for (const auto& rj : j.at("replicates")) {
            ReplicateOutcome r;
            r.index = rj.at("replicate").get<std::size_t>() - 1;
            r.seed = rj.at("seed").get<std::uint64_t>();
            r.ok = rj.at("ok").get<bool>();
            if (!rj.at("parent").is_null()) r.parent = rj.at("parent").get<std::size_t>() - 1;
            r.error = rj.value("error", "");
            if (rj.contains("start")) r.start = parameter_matrix_from_json(rj.at("start"), layout);
            if (rj.contains("final")) r.final = parameter_matrix_from_json(rj.at("final"), layout);
            if (rj.contains("start_eval")) r.start_eval = eval_from_json(rj.at("start_eval"));
            if (rj.contains("final_eval")) r.final_eval = eval_from_json(rj.at("final_eval"));
            s.replicates.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        fail_input(std::string("malformed round document: ") + e.what());
    }
    return s;
}

}  // namespace ibpf::workflow
