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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "ibpf/io.hpp"
#include "ibpf/oracle.hpp"

using namespace ibpf;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "ibpf_cli_test";

struct Run {
    int code;
    std::string err;
};

Run cli(const std::string& args) {
    const auto err = kRoot / "stderr.txt";
    const std::string cmd = std::string(IBPF_CLI) + " " + args + " 2> " + err.string() + " > /dev/null";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_text(err)};
}

std::size_t lines(const fs::path& p) {
    const auto t = io::read_text(p);
    return static_cast<std::size_t>(std::count(t.begin(), t.end(), '\n'));
}

struct Fixture {
    Fixture() {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
        io::write_json(kRoot / "tiny.json", {{"units", 1}, {"weeks", 4}, {"J", 20}, {"M", 1}, {"eval_J", 20}, {"eval_reps", 2}});
    }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "simulate is deterministic for a fixed seed") {
    const std::string base = "simulate --model A --config " + (kRoot / "tiny.json").string() + " --seed 5 --out ";
    REQUIRE(cli(base + (kRoot / "s1").string()).code == 0);
    REQUIRE(cli(base + (kRoot / "s2").string()).code == 0);
    CHECK(io::read_text(kRoot / "s1/cases.csv") == io::read_text(kRoot / "s2/cases.csv"));
    CHECK(io::read_text(kRoot / "s1/truth.json") == io::read_text(kRoot / "s2/truth.json"));
    CHECK(lines(kRoot / "s1/cases.csv") == 1 + 4);
    const auto manifest = io::read_json(kRoot / "s1/manifest.json");
    CHECK(manifest.at("seed") == 5);
    CHECK(manifest.at("outputs").contains("cases.csv"));
    CHECK(manifest.at("outputs").at("cases.csv") == io::sha256_file(kRoot / "s1/cases.csv"));
}

TEST_CASE_FIXTURE(Fixture, "search, refine and eval pipeline") {
    const std::string cfg = " --config " + (kRoot / "tiny.json").string();
    REQUIRE(cli("simulate --model A" + cfg + " --seed 5 --out " + (kRoot / "sim").string()).code == 0);
    const std::string inputs = " --model A" + cfg + " --data " + (kRoot / "sim/cases.csv").string() + " --covars " +
                               (kRoot / "sim/covars").string();
    REQUIRE(cli("search" + inputs + " --replicates 2 --seed 9 --out " + (kRoot / "r1").string()).code == 0);
    CHECK(fs::exists(kRoot / "r1/rep_001/trace.csv"));
    CHECK(fs::exists(kRoot / "r1/rep_002/trace.csv"));
    CHECK(lines(kRoot / "r1/rep_001/trace.csv") == 1 + 1);  // header + M rows
    const auto round = io::read_json(kRoot / "r1/round.json");
    CHECK(round.at("replicates").size() == 2);

    // Byte-identical rerun.
    REQUIRE(cli("search" + inputs + " --replicates 2 --seed 9 --out " + (kRoot / "r1b").string()).code == 0);
    CHECK(io::read_text(kRoot / "r1/round.json") == io::read_text(kRoot / "r1b/round.json"));
    CHECK(io::read_text(kRoot / "r1/rep_002/params.csv") == io::read_text(kRoot / "r1b/rep_002/params.csv"));

    io::write_json(kRoot / "refine.json", {{"units", 1}, {"J", 20}, {"M", 1}, {"eval_J", 20}, {"eval_reps", 2}, {"q", 0.5}, {"k", 3}});
    const std::string rinputs = " --model A --config " + (kRoot / "refine.json").string() + " --data " +
                                (kRoot / "sim/cases.csv").string() + " --covars " + (kRoot / "sim/covars").string();
    REQUIRE(cli("refine" + rinputs + " --round " + (kRoot / "r1/round.json").string() + " --seed 10 --out " +
                (kRoot / "r2").string())
                .code == 0);
    const auto r2 = io::read_json(kRoot / "r2/round.json");
    CHECK(r2.at("round") == 2);
    CHECK(r2.at("replicates").size() == 3);  // k * ceil(q * 2)

    REQUIRE(cli("eval" + inputs + " --params " + (kRoot / "sim/truth.json").string() + " --out " + (kRoot / "ev").string()).code == 0);
    const auto ev = io::read_json(kRoot / "ev/eval.json");
    CHECK(ev.at("logliks").size() == 2);
    REQUIRE(cli("filter" + inputs + " --out " + (kRoot / "fl").string()).code == 0);
    CHECK(lines(kRoot / "fl/cond_loglik.csv") == 1 + 4);
}

TEST_CASE_FIXTURE(Fixture, "hmm fixture evaluation") {
    io::write_json(kRoot / "hmm.json", oracle::random_coupled_hmm(2, 3, 3, 0.4, 2).to_json());
    io::write_text(kRoot / "hmm.csv", "t,unit,cases\n1,unit1,0\n1,unit2,2\n2,unit1,1\n2,unit2,NA\n");
    io::write_json(kRoot / "hcfg.json", {{"eval_J", 200}, {"eval_reps", 3}});
    REQUIRE(cli("eval --model hmm-fixture --fixture " + (kRoot / "hmm.json").string() + " --data " +
                (kRoot / "hmm.csv").string() + " --config " + (kRoot / "hcfg.json").string() + " --out " +
                (kRoot / "hev").string())
                .code == 0);
    CHECK(std::isfinite(io::read_json(kRoot / "hev/eval.json").at("mean").get<double>()));
}

TEST_CASE_FIXTURE(Fixture, "errors are reported by category") {
    const auto missing = cli("filter --model A --data nowhere.csv --covars " + (kRoot / "nope").string() + " --out " +
                             (kRoot / "e1").string());
    CHECK(missing.code == 3);
    CHECK(nlohmann::json::parse(missing.err).at("error").at("category") == "input");
    const auto usage = cli("simulate --bogus");
    CHECK(usage.code == 2);
    CHECK(nlohmann::json::parse(usage.err).at("error").at("category") == "usage");
    io::write_json(kRoot / "badcfg.json", {{"particles", 3}});
    CHECK(cli("simulate --config " + (kRoot / "badcfg.json").string() + " --out " + (kRoot / "e2").string()).code == 2);
    CHECK(cli("refine --round " + (kRoot / "none.json").string() + " --out " + (kRoot / "e3").string()).code == 3);
}
