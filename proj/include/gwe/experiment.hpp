#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gwe/distributions.hpp"
#include "gwe/tree.hpp"
#include "gwe/walk.hpp"

namespace gwe::cli {

using nlohmann::json;

inline const char* const kSummaryHeader = "level,n,median_delta,q25,q75,censored_frac";
inline const char* const kEstimatorHeader = "estimator,value,se,target,p_value";
inline const char* const kPlotHeader = "x,y,y_err";

struct ExperimentConfig {
    std::string kind;  // walk-scaling, excursion-law, deep-trap-count, return-time-check, supercritical-tail, phase-sweep
    json law;
    double beta = 2.0;
    bool regime_check = true;
    std::uint64_t min_level = 1;
    std::uint64_t max_level = 0;
    std::string observable = "hitting";  // or "distance"
    std::uint64_t min_steps = 1;
    std::uint64_t max_steps = 0;
    std::uint64_t replicas = 1;
    std::uint64_t step_budget = kDefaultStepBudget;
    std::uint64_t node_budget = kDefaultNodeBudget;
    std::uint64_t master_seed = 0;
    std::string out = "out";
    std::string engine = "step";  // or "aggregated"
    std::uint64_t excursion_cap = 0;
    std::uint64_t threshold = 6;
    std::uint64_t branches = 1000;
    std::uint64_t margin = 40;
    std::uint64_t depth = 12;
    std::uint64_t tail_min = 4;
    std::uint64_t tail_max = 10;
    std::uint64_t max_vertices = 50;
    std::vector<double> laplace_s{0.5, 1.0, 2.0};
    json grid;  // phase-sweep: {"mu": [...], "beta": [...], "alpha": number or null}

    static ExperimentConfig from_json(const json& j);
    json to_json() const;
    // FNV-1a of the canonical form, without the output path and replica count
    std::string hash() const;
};

ExperimentConfig load_config(const std::string& path);
OffspringLaw make_law(const json& spec);

// One replica. Deterministic in (config, replica).
json run_replica(const ExperimentConfig& config, std::uint64_t replica);
json run_replica(const ExperimentConfig& config, const OffspringLaw& law, std::uint64_t replica);

json summarize(const ExperimentConfig& config, const std::vector<json>& records);

struct RunOptions {
    unsigned jobs = 0;  // 0: hardware concurrency
    bool resume = false;
    std::ostream* log = nullptr;
};

// Runs all replicas, writes records.jsonl, timing.jsonl, summary.json and the CSV outputs.
json run_experiment(const ExperimentConfig& config, const RunOptions& options);

void emit_outputs(const ExperimentConfig& config, const std::vector<json>& records, const json& summary);

// One row per (mu, beta) cell: mu,beta,alpha,regime,gamma,q,fq_prime
std::string phase_sweep_csv(const ExperimentConfig& config);

std::string csv_field(const json& v);

}  // namespace gwe::cli
