#include "gwe/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gwe/analytics.hpp"
#include "gwe/errors.hpp"

namespace gwe {

Tree sample_gw(const OffspringLaw& law, std::uint32_t max_depth, const SeedStream& stream,
               std::uint64_t node_budget) {
    Tree t = Tree::galton_watson(law, max_depth, stream.tree_seed(), node_budget);
    std::vector<NodeId> stack{t.root()};
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        if (t.node(v).frozen) continue;
        t.expand(v);
        const std::uint64_t ne = t.node(v).n_explicit;
        for (std::uint64_t j = 0; j < ne; ++j) stack.push_back(t.explicit_child(v, j));
    }
    return t;
}

Tree sample_kesten(const OffspringLaw& law, std::uint32_t n_generations, const SeedStream& stream,
                   std::uint64_t node_budget) {
    Tree t = Tree::kesten(law, stream.tree_seed(), node_budget);
    t.extend_backbone(n_generations);
    return t;
}

Tree sample_supercritical_conditioned(const OffspringLaw& law, std::uint32_t n_generations,
                                      const SeedStream& stream, std::uint64_t node_budget) {
    const double q = extinction_probability(law);
    Tree t = Tree::supercritical(law, q, stream.tree_seed(), node_budget);
    t.extend_backbone(n_generations);
    return t;
}

PhiPsiSampler::PhiPsiSampler(const OffspringLaw& law, int max_level) : law_(law) {
    if (max_level < 0) throw DomainError("height must be >= 0");
    HeightCdf h = height_cdf_and_cmu(law, max_level + 2);
    t_ = h.tail;
    psi_cdf_.resize(max_level);
    for (int n = 0; n < max_level; ++n) {
        if (!(t_[n + 1] - t_[n + 2] > 0.0)) continue;
        auto& cdf = psi_cdf_[n];
        double cum = 0.0;
        for (std::uint64_t k = 1; k <= 1'000'000; ++k) {
            if (law.tail(k) <= 0.0) break;
            cum += psi_marginal(n, k);
            cdf.push_back(cum);
            if (cum >= 1.0 - 1e-12) break;
        }
    }
}

double PhiPsiSampler::psi_marginal(int n, std::uint64_t k) const {
    const double z = t_[n + 1] - t_[n + 2];
    const double kd = static_cast<double>(k);
    double diff;
    if (n == 0) {
        diff = std::pow(1.0 - t_[1], kd);
    } else {
        const double d = (t_[n] - t_[n + 1]) / (1.0 - t_[n]);
        diff = std::exp(kd * std::log1p(-t_[n])) * std::expm1(kd * std::log1p(d));
    }
    return law_.pmf(k) * diff / z;
}

double PhiPsiSampler::probability(int n, std::uint64_t j, std::uint64_t k) const {
    if (j < 1 || j > k) return 0.0;
    const double sn = 1.0 - t_[n], sn1 = 1.0 - t_[n + 1];
    const double z = t_[n + 1] - t_[n + 2];
    return law_.pmf(k) * std::pow(sn, j - 1.0) * (t_[n] - t_[n + 1]) * std::pow(sn1, static_cast<double>(k - j)) / z;
}

PhiPsi PhiPsiSampler::sample(int n, Engine& g) const {
    if (n < 0 || n >= static_cast<int>(psi_cdf_.size()) || psi_cdf_[n].empty())
        throw ImpossibleHeight("no tree of this height under the law");
    const auto& cdf = psi_cdf_[n];
    const double u = uniform_open(g);
    std::uint64_t k;
    if (u < cdf.back()) {
        k = static_cast<std::uint64_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) + 1;
    } else {
        const std::uint64_t kmax = cdf.size();
        const double beyond = law_.tail(kmax + 1);
        if (beyond <= 0.0) {
            k = kmax;
        } else {
            // rejection from the offspring law restricted to k > kmax
            const double z = t_[n + 1] - t_[n + 2];
            for (;;) {
                k = std::max(kmax + 1, law_.sample_from_uniform(uniform_open(g) * beyond));
                double accept = psi_marginal(n, k) * z / law_.pmf(k);
                if (uniform_open(g) < accept) break;
            }
        }
    }
    std::uint64_t phi = 1;
    if (n > 0) {
        // P(phi - 1 >= i) = (r^i - r^k)/(1 - r^k), r = s_n/s_{n+1}
        const double lr = std::log1p(-(t_[n] - t_[n + 1]) / (1.0 - t_[n + 1]));
        const double one_minus_rk = -std::expm1(static_cast<double>(k) * lr);
        const double v = uniform_open(g);
        double x = std::floor(std::log1p(-(1.0 - v) * one_minus_rk) / lr);
        phi = 1 + static_cast<std::uint64_t>(std::clamp(x, 0.0, static_cast<double>(k - 1)));
    }
    return {phi, k};
}

namespace {

// Appends a GW tree of height <= h below `parent` by rejection. h >= 0.
void append_bounded(const OffspringLaw& law, int h, NodeId parent, Engine& g, std::vector<NodeId>& parents) {
    std::vector<NodeId> local;  // parent index within the attempt, kNoNode for its root
    for (;;) {
        local.assign(1, kNoNode);
        std::vector<NodeId> level{0};
        bool ok = true;
        for (int d = 0; ok && !level.empty(); ++d) {
            std::vector<NodeId> next;
            for (NodeId v : level) {
                std::uint64_t k = law.sample(g);
                if (k == 0) continue;
                if (d == h) {
                    ok = false;
                    break;
                }
                for (std::uint64_t c = 0; c < k; ++c) {
                    next.push_back(static_cast<NodeId>(local.size()));
                    local.push_back(v);
                }
            }
            level.swap(next);
        }
        if (ok) break;
    }
    const NodeId base = static_cast<NodeId>(parents.size());
    for (NodeId p : local) parents.push_back(p == kNoNode ? parent : base + p);
}

}  // namespace

HeightConditionedTree sample_height_conditioned(const OffspringLaw& law, int height, const SeedStream& stream) {
    if (height < 0) throw ImpossibleHeight("negative height");
    HeightCdf hc = height_cdf_and_cmu(law, height + 2);
    if (!(hc.tail[height] - hc.tail[height + 1] > 0.0))
        throw ImpossibleHeight("P(H(T) = " + std::to_string(height) + ") = 0 under the law");
    PhiPsiSampler pp(law, height);
    Engine g = stream.engine();
    std::vector<NodeId> parents{kNoNode};
    std::vector<NodeId> spine_raw(height + 1);
    std::vector<std::vector<NodeId>> sub_raw(height + 1);
    spine_raw[height] = 0;
    NodeId current = 0;
    for (int level = height; level >= 1; --level) {
        const int n = level - 1;
        PhiPsi s = pp.sample(n, g);
        NodeId next = kNoNode;
        for (std::uint64_t c = 1; c <= s.psi; ++c) {
            if (c == s.phi) {
                next = static_cast<NodeId>(parents.size());
                parents.push_back(current);
            } else {
                sub_raw[level].push_back(static_cast<NodeId>(parents.size()));
                append_bounded(law, c < s.phi ? n - 1 : n, current, g, parents);
            }
        }
        current = next;
        spine_raw[level - 1] = current;
    }
    auto built = Tree::from_parents(parents, {});
    HeightConditionedTree out{std::move(built.tree), {}, {}};
    for (NodeId v : spine_raw) out.spine.push_back(built.id_of[v]);
    for (auto& list : sub_raw) {
        std::vector<NodeId> mapped;
        for (NodeId v : list) mapped.push_back(built.id_of[v]);
        out.subtraps.push_back(std::move(mapped));
    }
    return out;
}

std::vector<BranchView> decompose_branches(const Tree& tree) {
    if (tree.kind() != TreeKind::Kesten && tree.kind() != TreeKind::Supercritical && tree.kind() != TreeKind::Fixed)
        throw DomainError("decompose_branches: tree has no backbone");
    std::vector<BranchView> out;
    for (NodeId x = 0; x < tree.size(); ++x) {
        const Node& n = tree.node(x);
        if (n.role != Role::Backbone) continue;
        if (!tree.expanded(x)) continue;
        BranchView b;
        b.root = x;
        b.leaf_buds = n.n_leaves;
        for (std::uint64_t j = 0; j < n.n_explicit; ++j) {
            NodeId c = tree.peek_explicit_child(x, j);
            if (c == kNoNode || !tree.subtree_complete(c))
                throw IncompleteExpansion("trap below backbone vertex " + std::to_string(x) + " is not fully grown");
            b.buds.push_back(c);
            b.trap_heights.push_back(tree.subtree_height(c));
        }
        if (b.bud_count() > 0) {
            std::uint32_t hmax = 0;
            for (auto h : b.trap_heights) hmax = std::max(hmax, h);
            b.height = 1 + hmax;
        }
        out.push_back(std::move(b));
    }
    return out;
}

void expand_traps(Tree& tree) {
    const std::size_t n0 = tree.size();
    for (NodeId x = 0; x < n0; ++x) {
        if (tree.node(x).role != Role::Backbone || !tree.expanded(x)) continue;
        const std::uint64_t ne = tree.node(x).n_explicit;
        for (std::uint64_t j = 0; j < ne; ++j) tree.expand_subtree(tree.explicit_child(x, j));
    }
}

bool nonleaf_trap_reaches(const OffspringLaw& trap_law, std::uint32_t m, Engine& g) {
    if (m == 0) return true;
    // depth-first with an explicit stack of pending child counts
    std::vector<std::uint64_t> pending;
    pending.push_back(trap_law.sample_positive(g));
    while (!pending.empty()) {
        if (pending.size() > m) return true;
        if (pending.back() == 0) {
            pending.pop_back();
            continue;
        }
        --pending.back();
        pending.push_back(trap_law.sample(g));
    }
    return false;
}

BranchDeepCount sample_branch_deep_traps(const SizeBiasedLaw& spine, std::uint32_t m, double height_tail_m,
                                         Engine& g, std::uint64_t explicit_limit) {
    const OffspringLaw& law = spine.base();
    BranchDeepCount out;
    out.buds = spine.sample(g) - 1;
    if (out.buds == 0) return out;
    const double p0 = law.p0();
    std::uint64_t leaves = p0 >= 1.0 ? out.buds : std::binomial_distribution<std::uint64_t>(out.buds, p0)(g);
    std::uint64_t nonleaf = out.buds - leaves;
    if (m == 0) {
        out.deep = out.buds;
        return out;
    }
    if (nonleaf <= explicit_limit) {
        for (std::uint64_t j = 0; j < nonleaf; ++j) out.deep += nonleaf_trap_reaches(law, m, g) ? 1 : 0;
    } else {
        double p = std::min(1.0, height_tail_m / (1.0 - p0));
        out.deep = std::binomial_distribution<std::uint64_t>(nonleaf, p)(g);
    }
    return out;
}

}  // namespace gwe
