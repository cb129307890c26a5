#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "gwe/errors.hpp"
#include "gwe/experiment.hpp"
#include "gwe/selfcheck.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kIoExit = 3;

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const gwe::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigExit;
    } catch (const gwe::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kIoExit;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kIoExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Biased random walks on Galton-Watson trees"};
    app.require_subcommand(1);

    std::string config_path;
    unsigned jobs = 0;
    std::optional<std::uint64_t> seed, replicas;
    std::optional<std::string> out;
    bool resume = false;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "run an experiment");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--jobs,-j", jobs, "worker threads (default: all cores)");
    run->add_option("--seed", seed, "override master_seed");
    run->add_option("--replicas", replicas, "override replicas");
    run->add_option("--out", out, "override output directory");
    run->add_flag("--resume", resume, "skip replicas already in records.jsonl");
    run->add_flag("--quiet,-q", quiet, "no progress output");

    std::string phase_path;
    std::optional<std::string> phase_out;
    auto* phase = app.add_subcommand("phase", "print the regime of every (mu, beta) grid cell");
    phase->add_option("config", phase_path, "phase-sweep config (JSON)")->required();
    phase->add_option("--out", phase_out, "also write phase.csv into this directory");

    auto* check = app.add_subcommand("check", "oracle and closed-form self-test");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kConfigExit;
    }

    if (*run) {
        return guarded([&] {
            auto j = [&] {
                std::ifstream is(config_path);
                if (!is) throw gwe::IoError("cannot read " + config_path);
                try {
                    return nlohmann::json::parse(is);
                } catch (const nlohmann::json::exception& e) {
                    throw gwe::ConfigError(std::string("invalid JSON: ") + e.what());
                }
            }();
            if (!j.is_object()) throw gwe::ConfigError("config must be a JSON object");
            if (seed) j["master_seed"] = *seed;
            if (replicas) j["replicas"] = *replicas;
            if (out) j["out"] = *out;
            auto config = gwe::cli::ExperimentConfig::from_json(j);
            gwe::cli::RunOptions opt;
            opt.jobs = jobs;
            opt.resume = resume;
            opt.log = quiet ? nullptr : &std::cerr;
            auto summary = gwe::cli::run_experiment(config, opt);
            std::cout << summary.dump(2) << '\n';
            return 0;
        });
    }
    if (*phase) {
        return guarded([&] {
            auto config = gwe::cli::load_config(phase_path);
            if (config.kind != "phase-sweep") throw gwe::ConfigError("phase needs a phase-sweep config");
            if (phase_out) {
                config.out = *phase_out;
                gwe::cli::run_experiment(config, {});
            }
            std::cout << gwe::cli::phase_sweep_csv(config);
            return 0;
        });
    }
    if (*check) {
        return guarded([&] {
            const int failures = gwe::run_self_check(std::cout);
            std::cout << (failures == 0 ? "all checks passed" : "self-check failed") << '\n';
            return failures == 0 ? 0 : 1;
        });
    }
    return 0;
}
