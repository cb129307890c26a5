#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "gwe/analytics.hpp"
#include "gwe/errors.hpp"
#include "gwe/experiment.hpp"

using namespace gwe;
using namespace gwe::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("gwe-cli-" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string first_line(const fs::path& p) {
    std::ifstream is(p);
    std::string line;
    std::getline(is, line);
    return line;
}

json walk_config() {
    return {{"kind", "walk-scaling"},
            {"law", {{"family", "geometric"}, {"a", 1.0 / 3.0}}},
            {"beta", 3.0},
            {"min_level", 4},
            {"max_level", 64},
            {"replicas", 12},
            {"master_seed", 77}};
}

int invoke(const std::string& args) {
    const std::string cmd = std::string(GWE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config round trip and hash") {
    auto c = ExperimentConfig::from_json(walk_config());
    auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.hash() == c.hash());
    CHECK(c.hash().size() == 16);

    auto j = walk_config();
    j["out"] = "elsewhere";
    j["replicas"] = 999;
    CHECK(ExperimentConfig::from_json(j).hash() == c.hash());
    j["master_seed"] = 78;
    CHECK(ExperimentConfig::from_json(j).hash() != c.hash());

    auto p = scratch("roundtrip.json");
    std::ofstream(p) << c.to_json().dump(2);
    CHECK(load_config(p.string()).to_json() == c.to_json());
}

TEST_CASE("config validation") {
    auto bad = [](auto edit) {
        json j = walk_config();
        edit(j);
        return j;
    };
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["colour"] = 1; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["replicas"] = 0; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["step_budget"] = 0; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["kind"] = "nope"; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["law"]["a"] = 1.5; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["law"] = {{"family", "zipf"}}; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["beta"] = 1.0; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["beta"] = 2.0; })), ConfigError);
    CHECK_NOTHROW(ExperimentConfig::from_json(bad([](json& j) {
        j["beta"] = 2.0;
        j["regime_check"] = false;
    })));
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("replicas are deterministic") {
    auto c = ExperimentConfig::from_json(walk_config());
    CHECK(run_replica(c, 3).dump() == run_replica(c, 3).dump());
    CHECK(run_replica(c, 3).dump() != run_replica(c, 4).dump());
    auto r = run_replica(c, 0);
    CHECK(r.at("config_hash") == c.hash());
    CHECK(r.at("replica") == 0);
    CHECK(r.at("regime") == "FVIE");
}

TEST_CASE("records do not depend on the worker count") {
    auto c = ExperimentConfig::from_json(walk_config());
    c.out = scratch("jobs1").string();
    run_experiment(c, RunOptions{1});
    auto d = c;
    d.out = scratch("jobs3").string();
    run_experiment(d, RunOptions{3});
    for (const char* f : {"records.jsonl", "summary.json", "summary.csv", "estimators.csv", "plot.csv"}) {
        CAPTURE(f);
        CHECK(slurp(fs::path(c.out) / f) == slurp(fs::path(d.out) / f));
    }
    CHECK(slurp(fs::path(c.out) / "records.jsonl").find("wall") == std::string::npos);
    std::ifstream timing(fs::path(c.out) / "timing.jsonl");
    int lines = 0;
    for (std::string l; std::getline(timing, l);) ++lines;
    CHECK(lines == 12);
}

TEST_CASE("resume after a crash") {
    auto c = ExperimentConfig::from_json(walk_config());
    c.out = scratch("full").string();
    run_experiment(c, RunOptions{1});
    const std::string full = slurp(fs::path(c.out) / "records.jsonl");

    auto d = c;
    d.out = scratch("crashed").string();
    fs::create_directories(d.out);
    std::size_t cut = 0;
    for (int i = 0; i < 5; ++i) cut = full.find('\n', cut) + 1;
    const std::size_t half = cut + (full.find('\n', cut) - cut) / 2;
    std::ofstream(fs::path(d.out) / "records.jsonl", std::ios::binary) << full.substr(0, half);
    run_experiment(d, RunOptions{2, true});
    CHECK(slurp(fs::path(d.out) / "records.jsonl") == full);
    CHECK(slurp(fs::path(d.out) / "summary.json") == slurp(fs::path(c.out) / "summary.json"));

    // resuming a finished run changes nothing
    run_experiment(d, RunOptions{2, true});
    CHECK(slurp(fs::path(d.out) / "records.jsonl") == full);

    auto other = d;
    other.master_seed = 5;
    CHECK_THROWS_AS(run_experiment(other, RunOptions{1, true}), ConfigError);
}

TEST_CASE("CSV headers and explicit nulls") {
    CHECK(csv_field(nullptr) == "null");
    CHECK(csv_field(0.1) == "0.10000000000000001");
    CHECK(csv_field("x") == "x");

    auto j = walk_config();
    j["step_budget"] = 50;
    j["replicas"] = 4;
    auto c = ExperimentConfig::from_json(j);
    c.out = scratch("censored").string();
    run_experiment(c, RunOptions{1});
    const fs::path dir(c.out);
    CHECK(first_line(dir / "summary.csv") == kSummaryHeader);
    CHECK(first_line(dir / "estimators.csv") == kEstimatorHeader);
    CHECK(first_line(dir / "plot.csv") == kPlotHeader);
    const std::string body = slurp(dir / "summary.csv");
    CHECK(body.find("null") != std::string::npos);
    CHECK(body.find(",,") == std::string::npos);
    std::istringstream rows(body);
    for (std::string line; std::getline(rows, line);) CHECK(std::count(line.begin(), line.end(), ',') == 5);
}

TEST_CASE("excursion-law summary reports the geometric target") {
    json j{{"kind", "excursion-law"},
           {"law", {{"family", "geometric"}, {"a", 1.0 / 3.0}}},
           {"beta", 2.0},
           {"max_level", 200},
           {"margin", 40},
           {"replicas", 20},
           {"master_seed", 3}};
    auto c = ExperimentConfig::from_json(j);
    c.out = scratch("excursion").string();
    json s = run_experiment(c, RunOptions{1});
    bool found = false;
    for (const auto& e : s.at("estimators"))
        if (e.at("estimator") == "single_trap_p") {
            found = true;
            CHECK(e.at("target").get<double>() == doctest::Approx(1.0 / 3.0));
            CHECK(e.at("p_value").is_number());
            CHECK(std::abs(e.at("value").get<double>() - 1.0 / 3.0) < 4.0 * e.at("se").get<double>());
        }
    CHECK(found);
}

TEST_CASE("phase sweep matches the classifier") {
    json j{{"kind", "phase-sweep"}, {"grid", {{"mu", {0.5, 2.0}}, {"beta", {0.8, 1.5, 2.0, 3.0}}}}};
    auto c = ExperimentConfig::from_json(j);
    std::istringstream csv(phase_sweep_csv(c));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "mu,beta,alpha,regime,gamma,q,fq_prime");
    int rows = 0;
    while (std::getline(csv, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
        REQUIRE(f.size() == 7);
        const double mu = std::stod(f[0]), beta = std::stod(f[1]);
        const auto rp = regime_params(OffspringLaw::geometric(mu / (1.0 + mu)), beta);
        CHECK(f[3] == regime_name(rp.regime));
        ++rows;
    }
    CHECK(rows == 8);
}

TEST_CASE("command line exit codes") {
    const fs::path dir = scratch("exit");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.json") << R"({"kind": "walk-scaling", "colour": 3})";
    std::ofstream(dir / "broken.json") << "{ not json";
    json good = walk_config();
    good["replicas"] = 2;
    good["max_level"] = 16;
    std::ofstream(dir / "good.json") << good.dump();
    std::ofstream(dir / "blocker") << "a file";

    CHECK(invoke("run " + (dir / "bad.json").string()) == 2);
    CHECK(invoke("run " + (dir / "broken.json").string()) == 2);
    CHECK(invoke("run " + (dir / "missing.json").string()) == 3);
    CHECK(invoke("run " + (dir / "good.json").string() + " --out " + (dir / "blocker" / "sub").string()) == 3);
    CHECK(invoke("run -q " + (dir / "good.json").string() + " --out " + (dir / "ok").string()) == 0);
    CHECK(fs::exists(dir / "ok" / "records.jsonl"));
    CHECK(invoke("frobnicate") == 2);
}
