#pragma once

#include <cstdint>
#include <vector>

#include "gwe/distributions.hpp"
#include "gwe/rng.hpp"
#include "gwe/tree.hpp"

namespace gwe {

Tree sample_gw(const OffspringLaw& law, std::uint32_t max_depth, const SeedStream& stream,
               std::uint64_t node_budget = kDefaultNodeBudget);

// Spine rho_0..rho_n is built; traps grow lazily.
Tree sample_kesten(const OffspringLaw& law, std::uint32_t n_generations, const SeedStream& stream,
                   std::uint64_t node_budget = kDefaultNodeBudget);

Tree sample_supercritical_conditioned(const OffspringLaw& law, std::uint32_t n_generations,
                                      const SeedStream& stream,
                                      std::uint64_t node_budget = kDefaultNodeBudget);

struct HeightConditionedTree {
    Tree tree;
    std::vector<NodeId> spine;                   // spine[0] deepest, spine[H] root
    std::vector<std::vector<NodeId>> subtraps;   // children of spine[k] off the spine
};

HeightConditionedTree sample_height_conditioned(const OffspringLaw& law, int height, const SeedStream& stream);

// Joint law of (phi, psi) at level n: first-maximal child index and first-generation size.
struct PhiPsi {
    std::uint64_t phi;
    std::uint64_t psi;
};
class PhiPsiSampler {
public:
    PhiPsiSampler(const OffspringLaw& law, int max_level);
    PhiPsi sample(int n, Engine& g) const;
    double probability(int n, std::uint64_t j, std::uint64_t k) const;

private:
    OffspringLaw law_;
    std::vector<double> t_;  // 1 - s_n
    std::vector<std::vector<double>> psi_cdf_;
    double psi_marginal(int n, std::uint64_t k) const;
};

struct BranchView {
    NodeId root = kNoNode;
    std::vector<NodeId> buds;              // explicit (non-leaf) buds
    std::uint64_t leaf_buds = 0;           // childless buds, height 0
    std::vector<std::uint32_t> trap_heights;  // per explicit bud
    std::uint32_t height = 0;              // 1 + max trap height, 0 without buds
    std::uint64_t bud_count() const { return buds.size() + leaf_buds; }
};

// Branches of every expanded backbone vertex. Throws IncompleteExpansion when a trap is not fully grown.
std::vector<BranchView> decompose_branches(const Tree& tree);
// Grow all traps hanging off expanded backbone vertices.
void expand_traps(Tree& tree);

// Whether a GW tree whose root is conditioned to have >= 1 child reaches depth m.
bool nonleaf_trap_reaches(const OffspringLaw& trap_law, std::uint32_t m, Engine& g);

struct BranchDeepCount {
    std::uint64_t buds = 0;
    std::uint64_t deep = 0;  // traps of height >= m
};
// One subcritical branch: bud count from the size-biased law, deep traps counted by
// explicit search when there are at most explicit_limit non-leaf buds, by a binomial draw otherwise.
BranchDeepCount sample_branch_deep_traps(const SizeBiasedLaw& spine, std::uint32_t m, double height_tail_m,
                                         Engine& g, std::uint64_t explicit_limit = 1'000'000);

}  // namespace gwe
