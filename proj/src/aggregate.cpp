#include "gwe/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gwe/analytics.hpp"
#include "gwe/errors.hpp"
#include "gwe/tree.hpp"
#include "gwe/walk.hpp"

namespace gwe {

AggregateResult sample_hitting_times_aggregated(const OffspringLaw& law, double beta,
                                                std::vector<std::uint64_t> levels,
                                                const AggregateOptions& options, const SeedStream& stream) {
    if (!(beta > 1.0)) throw DomainError("aggregated sampler: needs beta > 1");
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (levels.empty()) throw DomainError("aggregated sampler: no levels");
    const bool capped = options.exact_excursion_cap > 0;
    const double mean_nonleaf = capped ? mean_nonleaf_excursion(law, beta) : 0.0;

    Tree tree = Tree::kesten(law, stream.tree_seed(), options.node_budget);
    WalkOptions wopt;
    wopt.beta = beta;
    wopt.step_budget = ~std::uint64_t{0};
    Walker walker(tree, wopt, stream.engine());
    Engine& g = walker.engine();

    AggregateResult out;
    out.levels = levels;
    out.hitting.assign(levels.size(), 0.0);
    const std::uint64_t top = levels.back();
    std::vector<NodeId> spine{tree.root()};
    std::vector<std::uint64_t> walked(1, 0);
    std::vector<char> mean_field_used(1, 0);

    double time = 0.0;
    std::size_t next = 0;
    while (next < levels.size() && levels[next] == 0) out.hitting[next++] = 0.0;
    std::uint64_t i = 0;
    while (i < top) {
        const NodeId rho = spine[i];
        const Node n = tree.node(rho);
        const std::uint64_t buds = n.n_explicit + n.n_leaves;
        const double d = static_cast<double>(buds + 1);
        // bud excursions before the next backbone move: geometric on {0,1,...}
        const double p_stay = i == 0 ? static_cast<double>(buds) / d : beta * buds / (1.0 + beta * d);
        std::uint64_t excursions = 0;
        if (buds > 0) {
            const double x = std::floor(std::log(uniform_open(g)) / std::log(p_stay));
            excursions = x < 9e18 ? static_cast<std::uint64_t>(x) : ~std::uint64_t{0} >> 2;
        }
        if (excursions > 0) {
            std::uint64_t to_leaves = 0;
            if (n.n_leaves == buds)
                to_leaves = excursions;
            else if (n.n_leaves > 0)
                to_leaves = std::binomial_distribution<std::uint64_t>(
                    excursions, static_cast<double>(n.n_leaves) / static_cast<double>(buds))(g);
            time += 2.0 * static_cast<double>(to_leaves);
            std::uint64_t rest = excursions - to_leaves;
            while (rest > 0) {
                if (capped && walked[i] >= options.exact_excursion_cap) {
                    time += mean_nonleaf * static_cast<double>(rest);
                    out.capped_steps += mean_nonleaf * static_cast<double>(rest);
                    if (!mean_field_used[i]) {
                        mean_field_used[i] = 1;
                        ++out.capped_branches;
                    }
                    break;
                }
                const std::uint64_t j = std::min<std::uint64_t>(
                    static_cast<std::uint64_t>(uniform_open(g) * static_cast<double>(n.n_explicit)), n.n_explicit - 1);
                const NodeId bud = tree.explicit_child(rho, j);
                walker.place(bud);
                time += 1.0 + static_cast<double>(walker.run_until_hit(rho));
                ++walked[i];
                ++out.walked_excursions;
                --rest;
            }
        }
        time += 1.0;
        if (i == 0 || uniform_open(g) * (1.0 + beta) < beta) {
            ++i;
            if (i == spine.size()) {
                spine.push_back(tree.backbone_child(rho, 0));
                walked.push_back(0);
                mean_field_used.push_back(0);
            }
            while (next < levels.size() && levels[next] <= i) out.hitting[next++] = time;
        } else {
            --i;
        }
    }
    out.nodes = tree.size();
    return out;
}

}  // namespace gwe
