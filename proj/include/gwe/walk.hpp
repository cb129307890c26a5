#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "gwe/rng.hpp"
#include "gwe/tree.hpp"

namespace gwe {

inline constexpr std::uint64_t kDefaultStepBudget = 1'000'000'000;

struct WalkOptions {
    double beta = 2.0;
    std::uint64_t step_budget = kDefaultStepBudget;
    std::vector<std::uint64_t> levels;       // backbone levels for hitting times, ascending
    std::vector<std::uint64_t> checkpoints;  // step counts for |X|, ascending
    bool track_excursions = false;
};

struct TrapKey {
    NodeId branch;
    std::uint64_t bud;  // child index among the branch's non-backbone children
    auto operator<=>(const TrapKey&) const = default;
};

struct ExcursionRecord {
    std::uint64_t entries = 0;
    std::vector<std::uint64_t> durations;
};

struct WalkRun {
    double beta = 0.0;
    NodeId position = 0;
    bool in_leaf = false;
    std::uint64_t steps = 0;
    std::uint64_t step_budget = kDefaultStepBudget;
    std::uint64_t max_backbone_level = 0;
    std::vector<std::uint64_t> levels;
    std::vector<std::optional<std::uint64_t>> hitting;
    std::vector<std::uint64_t> checkpoints;
    std::vector<std::optional<std::uint64_t>> distance;
    std::map<TrapKey, ExcursionRecord> excursions;
    bool budget_exhausted = false;
};

struct Transition {
    double to_parent;      // 0 at the root
    double to_each_child;
    std::uint64_t children;
};
Transition transition_probabilities(const Tree& tree, NodeId x, double beta);

class Walker {
public:
    Walker(Tree& tree, WalkOptions options, Engine engine);

    // One kernel transition. Throws BudgetExceeded when the budget is used up.
    void step();
    // false when the budget ran out first
    bool run_to_level(std::uint64_t n);
    bool run_steps(std::uint64_t m);
    // Steps taken until the walk stands on target (not counting the current position).
    std::uint64_t run_until_hit(NodeId target);
    void place(NodeId x);

    const WalkRun& run() const { return run_; }
    WalkRun take() { return std::move(run_); }
    Engine& engine() { return engine_; }
    Tree& tree() { return tree_; }

private:
    void arrive_backbone(const Node& n);
    void record_checkpoints();

    Tree& tree_;
    WalkOptions opt_;
    Engine engine_;
    WalkRun run_;
    std::size_t next_level_ = 0;
    std::size_t next_checkpoint_ = 0;
    bool exc_open_ = false;
    TrapKey exc_key_{};
    std::uint64_t exc_start_ = 0;
};

WalkRun run_to_level(Tree& tree, double beta, std::uint64_t n, std::uint64_t budget, const SeedStream& stream,
                     std::vector<std::uint64_t> levels = {});
WalkRun run_for_steps(Tree& tree, double beta, std::uint64_t m, std::vector<std::uint64_t> checkpoints,
                      const SeedStream& stream);

struct TrapSummary {
    TrapKey key;
    std::uint64_t entries;
    std::vector<std::uint64_t> durations;
};
std::vector<TrapSummary> excursion_stats(const WalkRun& run);

// {2^j : lo <= 2^j <= hi} plus hi itself.
std::vector<std::uint64_t> dyadic_levels(std::uint64_t lo, std::uint64_t hi);

}  // namespace gwe
