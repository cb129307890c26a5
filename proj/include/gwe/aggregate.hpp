#pragma once

#include <cstdint>
#include <vector>

#include "gwe/distributions.hpp"
#include "gwe/rng.hpp"
#include "gwe/tree.hpp"

namespace gwe {

// Hitting times of backbone levels on a Kesten tree, sampled branch by branch.
// Backbone moves and leaf-bud excursions are drawn from their exact laws; every excursion
// into a non-leaf trap is walked step by step on the lazily grown tree. With a finite
// cap, non-leaf excursions past the cap in one branch contribute their mean duration.
struct AggregateOptions {
    std::uint64_t exact_excursion_cap = 0;  // 0: no cap, exact in law
    std::uint64_t node_budget = kDefaultNodeBudget;
};

struct AggregateResult {
    std::vector<std::uint64_t> levels;
    std::vector<double> hitting;        // steps
    std::uint64_t capped_branches = 0;  // branches that used the mean-field remainder
    double capped_steps = 0.0;          // steps contributed by the remainder
    std::uint64_t walked_excursions = 0;
    std::uint64_t nodes = 0;
};

AggregateResult sample_hitting_times_aggregated(const OffspringLaw& law, double beta,
                                                std::vector<std::uint64_t> levels,
                                                const AggregateOptions& options, const SeedStream& stream);

}  // namespace gwe
