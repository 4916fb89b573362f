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

// Command-line driver: simulate, filter, search, refine, eval, spatreg-sweep.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ibpf/error.hpp"
#include "ibpf/io.hpp"
#include "ibpf/measles.hpp"
#include "ibpf/oracle.hpp"
#include "ibpf/parallel.hpp"
#include "ibpf/workflow.hpp"

namespace fs = std::filesystem;
using namespace ibpf;

namespace {

constexpr const char* kSeedRule =
    "replicate r (0-based) uses derive_seed(seed, r) = splitmix64(seed ^ splitmix64(r + 0x9E3779B97F4A7C15)); "
    "its jitter uses derive_seed(replicate_seed, 0x717) and its evaluations derive_seed(replicate_seed, 0xEA1)";
constexpr std::uint64_t kJitterStream = 0x717;
constexpr std::uint64_t kCovariateSeed = 1;

struct Options {
    std::string model = "A";
    std::string data, covars, params, config, fixture, round;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::size_t replicates = 1;
    int threads = 0;
};

struct Problem {
    std::unique_ptr<SpatPompModel> model;
    std::optional<PanelData> data;
    std::vector<std::string> unit_names;
    std::map<std::string, double> sigma_defaults;
    std::optional<ParameterMatrix> theta;
    std::optional<measles::Covariates> covariates;
};

struct Context {
    Options opt;
    workflow::RunConfig rc;
    std::vector<std::string> argv;
    std::string command;
    std::map<std::string, std::string> inputs;  // path -> sha256
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void note_input(const std::string& path) {
        if (!path.empty()) inputs[path] = io::sha256_file(path);
    }
};

std::string replicate_dir(std::size_t index) {
    std::ostringstream os;
    os << "rep_";
    os.width(3);
    os.fill('0');
    os << index + 1;
    return os.str();
}

Problem load_problem(Context& ctx) {
    const auto& opt = ctx.opt;
    const auto& rc = ctx.rc;
    Problem p;
    if (opt.model == "hmm-fixture") {
        if (opt.fixture.empty()) fail_usage("--model hmm-fixture requires --fixture <doc>");
        ctx.note_input(opt.fixture);
        auto hmm = oracle::FiniteSpatHMM::from_json(io::read_json(opt.fixture));
        for (std::size_t u = 0; u < hmm.units; ++u) p.unit_names.push_back("unit" + std::to_string(u + 1));
        std::size_t times = rc.weeks;
        if (!opt.data.empty()) {
            ctx.note_input(opt.data);
            auto panel = io::read_panel_csv(opt.data, p.unit_names, 0.0, 1.0);
            for (std::size_t n = 0; n < panel.times.size(); ++n)
                if (panel.times[n] != static_cast<double>(n + 1))
                    fail_input(opt.data + ": fixture data must be indexed 1..N without gaps");
            times = panel.times.size();
            p.data = std::move(panel.data);
        }
        auto model = std::make_unique<oracle::HmmModel>(std::move(hmm), times);
        p.theta = model->no_params();
        p.model = std::move(model);
        return p;
    }

    const auto tag = measles::parse_submodel(opt.model);
    measles::Covariates cov;
    TimeGrid grid;
    grid.t0 = rc.t0;
    grid.dt = 1.0 / measles::kDaysPerYear;
    if (!opt.covars.empty()) {
        for (const char* f : {"population.csv", "births.csv", "distances.csv", "calendar.json"})
            if (fs::exists(fs::path(opt.covars) / f)) ctx.note_input((fs::path(opt.covars) / f).string());
        cov = measles::read_covariates(opt.covars);
    }
    std::optional<io::Panel> panel;
    if (!opt.data.empty()) {
        ctx.note_input(opt.data);
        if (opt.covars.empty()) fail_usage("--data requires --covars naming the units it refers to");
        panel = io::read_panel_csv(opt.data, cov.names, rc.t0, measles::kWeek);
        grid.obs_times = panel->times;
    } else {
        for (std::size_t n = 1; n <= rc.weeks; ++n) grid.obs_times.push_back(rc.t0 + static_cast<double>(n) * measles::kWeek);
    }
    if (opt.covars.empty()) {
        const int first = static_cast<int>(std::floor(rc.t0)) - 5;
        const int last = static_cast<int>(std::floor(grid.obs_times.back())) + 1;
        cov = measles::synthetic_covariates(rc.units, first, last, kCovariateSeed);
    }
    p.unit_names = cov.names;
    p.covariates = cov;
    auto model = std::make_unique<measles::Model>(tag, std::move(cov), std::move(grid));
    p.theta = model->params_matrix(measles::simulation_params());
    p.sigma_defaults = measles::default_sigma_overrides(rc.sigma);
    if (panel) p.data = std::move(panel->data);
    p.model = std::move(model);
    return p;
}

ParameterMatrix load_theta(Context& ctx, const Problem& p) {
    if (ctx.opt.params.empty()) return *p.theta;
    ctx.note_input(ctx.opt.params);
    return parameter_matrix_from_json(io::read_json(ctx.opt.params), p.model->layout());
}

const PanelData& require_data(const Problem& p) {
    if (!p.data) fail_usage("this command needs --data");
    return *p.data;
}

void write_manifest(const Context& ctx, const nlohmann::json& extra = {}) {
    const fs::path out(ctx.opt.out);
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(out))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            files.push_back(fs::relative(e.path(), out).generic_string());
    std::sort(files.begin(), files.end());
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& f : files) outputs[f] = io::sha256_file(out / f);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.started).count();
    nlohmann::json m{{"command", ctx.command},
                     {"argv", ctx.argv},
                     {"model", ctx.opt.model},
                     {"seed", ctx.opt.seed},
                     {"seed_rule", kSeedRule},
                     {"replicates", ctx.opt.replicates},
                     {"threads", thread_count()},
                     {"config", ctx.rc.to_json()},
                     {"inputs", ctx.inputs},
                     {"outputs", outputs},
                     {"wall_seconds", wall}};
    for (const auto& [k, v] : extra.items()) m[k] = v;
    io::write_json(out / "manifest.json", m);
}

void cmd_simulate(Context& ctx) {
    auto p = load_problem(ctx);
    const auto theta = load_theta(ctx, p);
    auto data = workflow::simulate_panel(*p.model, theta, ctx.opt.seed);
    data.unit_names = p.unit_names;
    const fs::path out(ctx.opt.out);
    io::write_panel_csv(out / "cases.csv", data);
    io::write_json(out / "truth.json", to_json(theta));
    if (p.covariates) measles::write_covariates(*p.covariates, out / "covars");
    write_manifest(ctx);
}

void cmd_filter(Context& ctx) {
    auto p = load_problem(ctx);
    const auto& data = require_data(p);
    const auto theta = load_theta(ctx, p);
    const auto blocks = workflow::make_blocks(p.model->units(), ctx.rc.blocks);
    const auto res = bpf_run(*p.model, data, theta, ctx.rc.particles, FilterOptions{blocks, ctx.opt.seed, 0, false});
    const fs::path out(ctx.opt.out);
    io::write_json(out / "filter.json", res.to_json());
    std::ostringstream csv;
    res.write_csv(csv);
    io::write_text(out / "cond_loglik.csv", csv.str());
    write_manifest(ctx);
    std::cout << "loglik " << res.loglik << "\n";
}

void cmd_eval(Context& ctx) {
    auto p = load_problem(ctx);
    const auto& data = require_data(p);
    const auto theta = load_theta(ctx, p);
    const auto blocks = workflow::make_blocks(p.model->units(), ctx.rc.blocks);
    const auto e = workflow::evaluate(*p.model, data, theta, ctx.rc.eval_particles, ctx.rc.eval_reps, blocks, ctx.opt.seed);
    io::write_json(fs::path(ctx.opt.out) / "eval.json", e.to_json());
    write_manifest(ctx);
    std::cout << "loglik " << e.mean << " se " << e.se << "\n";
}

workflow::SearchRound run_round(Context& ctx, const Problem& p, const workflow::RunConfig& rc,
                                const std::vector<ParameterMatrix>& starts, const std::vector<std::optional<std::size_t>>& parents,
                                const fs::path& dir, std::size_t round_index) {
    const auto& data = require_data(p);
    const auto config = workflow::make_ibpf_config(rc, *p.model->layout(), data.times(), p.sigma_defaults);
    workflow::SearchRound round;
    round.round = round_index;
    round.quantile = round_index > 1 ? rc.quantile : 0.0;
    round.copies = round_index > 1 ? rc.copies : 0;
    for (std::size_t r = 0; r < starts.size(); ++r) {
        const std::uint64_t seed = derive_seed(ctx.opt.seed, r);
        auto outcome = workflow::run_replicate(*p.model, data, rc, config, starts[r], r, seed);
        outcome.parent = parents[r];
        workflow::write_replicate_files(outcome, dir / replicate_dir(r));
        std::cerr << "replicate " << r + 1 << "/" << starts.size()
                  << (outcome.ok ? " loglik " + std::to_string(outcome.final_eval->mean) : " failed: " + outcome.error)
                  << "\n";
        round.replicates.push_back(std::move(outcome));
    }
    io::write_json(dir / "round.json", round.to_json());
    return round;
}

void cmd_search(Context& ctx) {
    auto p = load_problem(ctx);
    const auto base = load_theta(ctx, p);
    std::vector<ParameterMatrix> starts;
    for (std::size_t r = 0; r < ctx.opt.replicates; ++r)
        starts.push_back(ctx.rc.jitter > 0.0
                             ? workflow::jitter(base, ctx.rc.jitter, derive_seed(derive_seed(ctx.opt.seed, r), kJitterStream))
                             : base);
    run_round(ctx, p, ctx.rc, starts, std::vector<std::optional<std::size_t>>(starts.size()), ctx.opt.out, 1);
    write_manifest(ctx);
}

void cmd_refine(Context& ctx) {
    if (ctx.opt.round.empty()) fail_usage("refine requires --round <round.json>");
    auto p = load_problem(ctx);
    ctx.note_input(ctx.opt.round);
    const auto prev = workflow::SearchRound::from_json(io::read_json(ctx.opt.round), p.model->layout());
    const auto scores = prev.scores();
    const auto completed = static_cast<std::size_t>(std::count_if(scores.begin(), scores.end(), [](double s) { return std::isfinite(s); }));
    if (static_cast<double>(completed) < 1.0 / ctx.rc.quantile - 1e-9)
        fail_input("previous round has " + std::to_string(completed) + " completed replicates; refinement at q=" +
                   std::to_string(ctx.rc.quantile) + " needs at least 1/q");
    const auto parents = workflow::select_parents(scores, ctx.rc.quantile);
    std::vector<ParameterMatrix> starts;
    std::vector<std::optional<std::size_t>> parent_of;
    for (auto i : parents)
        for (std::size_t c = 0; c < ctx.rc.copies; ++c) {
            starts.push_back(*prev.replicates[i].final);
            parent_of.push_back(prev.replicates[i].index);
        }
    run_round(ctx, p, ctx.rc, starts, parent_of, ctx.opt.out, prev.round + 1);
    write_manifest(ctx);
}

void cmd_spatreg_sweep(Context& ctx) {
    auto p = load_problem(ctx);
    const auto base = load_theta(ctx, p);
    std::ostringstream csv;
    csv.precision(17);
    csv << "spat_reg,replicate,final_loglik,se\n";
    for (std::size_t g = 0; g < ctx.rc.spat_reg_grid.size(); ++g) {
        auto rc = ctx.rc;
        rc.spat_reg = ctx.rc.spat_reg_grid[g];
        std::vector<ParameterMatrix> starts;
        for (std::size_t r = 0; r < ctx.opt.replicates; ++r)
            starts.push_back(rc.jitter > 0.0 ? workflow::jitter(base, rc.jitter, derive_seed(derive_seed(ctx.opt.seed, r), kJitterStream))
                                             : base);
        const auto round = run_round(ctx, p, rc, starts, std::vector<std::optional<std::size_t>>(starts.size()),
                                     fs::path(ctx.opt.out) / ("S_" + std::to_string(g + 1)), 1);
        for (const auto& r : round.replicates) {
            csv << rc.spat_reg << ',' << r.index + 1 << ',';
            if (r.ok) csv << r.final_eval->mean << ',' << r.final_eval->se << '\n';
            else csv << "NA,NA\n";
        }
    }
    io::write_text(fs::path(ctx.opt.out) / "sweep.csv", csv.str());
    write_manifest(ctx);
}

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::usage: return 2;
        case ErrorCategory::input: return 3;
        case ErrorCategory::numerical: return 4;
        case ErrorCategory::internal: return 5;
    }
    return 5;
}

int report(ErrorCategory c, const std::string& message) {
    std::cerr << nlohmann::json{{"error", {{"category", to_string(c)}, {"message", message}}}}.dump() << "\n";
    return exit_code(c);
}

}  // namespace

int main(int argc, char** argv) {
    Context ctx;
    ctx.argv.assign(argv + 1, argv + argc);
    CLI::App app{"Iterated block particle filter inference for spatiotemporal POMP models"};
    app.require_subcommand(1);
    auto& opt = ctx.opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--model", opt.model, "A, B, C or hmm-fixture")
            ->check(CLI::IsMember({"A", "B", "C", "hmm-fixture"}));
        sub->add_option("--data", opt.data, "Case report CSV (<time>,unit,cases)");
        sub->add_option("--covars", opt.covars, "Covariate directory");
        sub->add_option("--params", opt.params, "Parameter document");
        sub->add_option("--config", opt.config, "Run configuration document");
        sub->add_option("--fixture", opt.fixture, "Finite HMM document for --model hmm-fixture");
        sub->add_option("--seed", opt.seed, "Master seed");
        sub->add_option("--out", opt.out, "Output directory");
        sub->add_option("--replicates", opt.replicates, "Number of search replicates")->check(CLI::PositiveNumber);
        sub->add_option("--threads", opt.threads, "Worker threads (0 = default)")->check(CLI::NonNegativeNumber);
    };
    std::map<std::string, void (*)(Context&)> commands{{"simulate", cmd_simulate}, {"filter", cmd_filter},
                                                       {"search", cmd_search},     {"refine", cmd_refine},
                                                       {"eval", cmd_eval},         {"spatreg-sweep", cmd_spatreg_sweep}};
    const std::map<std::string, std::string> help{
        {"simulate", "Simulate case reports"},
        {"filter", "One block particle filter pass"},
        {"search", "Replicated IBPF searches"},
        {"refine", "Refinement round from the top quantile of a previous round"},
        {"eval", "Replicated likelihood evaluation"},
        {"spatreg-sweep", "Searches over a grid of spatial regularization values"}};
    for (const auto& [name, fn] : commands) {
        auto* sub = app.add_subcommand(name, help.at(name));
        add_common(sub);
        if (name == "refine") sub->add_option("--round", opt.round, "round.json of the previous round")->required();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report(ErrorCategory::usage, e.what());
    }

    try {
        ctx.command = app.get_subcommands().front()->get_name();
        if (!opt.config.empty()) {
            ctx.note_input(opt.config);
            ctx.rc = workflow::RunConfig::from_json(io::read_json(opt.config));
        }
        if (opt.threads > 0) set_thread_count(opt.threads);
        fs::create_directories(opt.out);
        commands.at(ctx.command)(ctx);
    } catch (const Error& e) {
        return report(e.category(), e.what());
    } catch (const std::exception& e) {
        return report(ErrorCategory::internal, e.what());
    }
    return 0;
}
