#include "gwe/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "gwe/errors.hpp"

namespace gwe::oracle {
namespace {

constexpr std::size_t kMaxStates = 10'000;
thread_local double g_residual = 0.0;

// Solves (I - Q) x = b over the free states by elimination from the leaves up.
// Every free vertex gets x_v = a_v + b_v x_parent; all terms stay positive, so no cancellation.
std::vector<double> solve_free(const AbsorptionProblem& pb, bool hit) {
    using Real = long double;
    const ExplicitTree& t = pb.tree();
    const std::size_t n = t.size();
    std::vector<Real> known(n, 0.0L);
    for (std::size_t v = 0; v < n; ++v)
        if (pb.is_absorbing(v)) known[v] = hit && pb.is_target(v) ? 1.0L : 0.0L;

    std::vector<std::size_t> order{t.root};
    for (std::size_t i = 0; i < order.size(); ++i)
        for (auto c : t.children[order[i]]) order.push_back(c);
    if (order.size() != n) throw Singular("absorption problem: tree is not connected");

    // e = 1 - b, kept separately because b is close to 1 deep in a trap
    std::vector<Real> a(n, 0.0L), b(n, 0.0L), e(n, 1.0L);
    for (std::size_t i = n; i-- > 0;) {
        const std::size_t v = order[i];
        if (pb.is_absorbing(v)) continue;
        const std::size_t up = t.parent[v];
        Real num = hit ? 0.0L : 1.0L, den = 0.0L, p_up = 0.0L;
        for (auto [w, pd] : pb.row(v)) {
            const Real p = pd;
            if (w == up) {
                p_up = p;
                if (pb.is_absorbing(w)) num += p * known[w];
                den += p;
            } else if (pb.is_absorbing(w)) {
                num += p * known[w];
                den += p;
            } else {
                num += p * a[w];
                den += p * e[w];
            }
        }
        if (!(den > 0.0L)) throw Singular("absorption system is singular");
        a[v] = num / den;
        if (up != ExplicitTree::npos && !pb.is_absorbing(up)) {
            b[v] = p_up / den;
            e[v] = (den - p_up) / den;
        } else {
            b[v] = 0.0L;
            e[v] = 1.0L;
        }
    }
    std::vector<Real> x(n);
    for (auto v : order) {
        if (pb.is_absorbing(v))
            x[v] = known[v];
        else
            x[v] = a[v] + (b[v] != 0.0L ? b[v] * x[t.parent[v]] : 0.0L);
    }

    Real res = 0.0L, xmax = 0.0L, bmax = hit ? 0.0L : 1.0L;
    for (std::size_t v = 0; v < n; ++v) {
        xmax = std::max(xmax, std::abs(x[v]));
        if (pb.is_absorbing(v)) continue;
        Real r = x[v] - (hit ? 0.0L : 1.0L);
        for (auto [w, p] : pb.row(v)) r -= p * x[w];
        res = std::max(res, std::abs(r));
    }
    const Real scale = 2.0L * xmax + bmax;
    g_residual = static_cast<double>(scale > 0.0L ? res / scale : res);
    if (!std::isfinite(g_residual) || g_residual > 1e-12) throw Singular("absorption solve residual too large");
    return std::vector<double>(x.begin(), x.end());
}

}  // namespace

ExplicitTree ExplicitTree::from_tree(const Tree& tree) {
    Tree::Flat f = tree.flatten();
    ExplicitTree t;
    const std::size_t n = f.parent.size();
    t.parent.resize(n);
    t.children.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (f.parent[v] == ~std::uint64_t{0}) {
            t.parent[v] = npos;
            t.root = v;
        } else {
            t.parent[v] = f.parent[v];
            t.children[f.parent[v]].push_back(v);
        }
    }
    return t;
}

ExplicitTree ExplicitTree::path(std::size_t edges) {
    ExplicitTree t;
    t.parent.resize(edges + 1);
    t.children.resize(edges + 1);
    t.parent[0] = npos;
    for (std::size_t v = 1; v <= edges; ++v) {
        t.parent[v] = v - 1;
        t.children[v - 1].push_back(v);
    }
    return t;
}

std::size_t ExplicitTree::depth(std::size_t v) const {
    std::size_t d = 0;
    while (parent[v] != npos) {
        v = parent[v];
        ++d;
    }
    return d;
}

AbsorptionProblem::AbsorptionProblem(ExplicitTree tree, double beta, std::vector<std::size_t> target,
                                     std::vector<std::size_t> forbidden)
    : tree_(std::move(tree)), beta_(beta), kind_(tree_.size(), 0) {
    if (!(beta > 1.0)) throw DomainError("absorption problem: beta must exceed 1");
    if (tree_.size() > kMaxStates) throw DomainError("absorption problem: more than 1e4 states");
    if (target.empty() && forbidden.empty()) throw DomainError("absorption problem: no absorbing state");
    for (auto v : target) kind_.at(v) = 1;
    for (auto v : forbidden) {
        if (kind_.at(v) == 1) throw DomainError("absorption problem: state is both target and forbidden");
        kind_[v] = 2;
    }
}

std::vector<std::pair<std::size_t, double>> AbsorptionProblem::row(std::size_t v) const {
    std::vector<std::pair<std::size_t, double>> r;
    const auto& ch = tree_.children[v];
    const double d = static_cast<double>(ch.size());
    if (tree_.parent[v] == ExplicitTree::npos) {
        for (auto c : ch) r.emplace_back(c, 1.0 / d);
        return r;
    }
    const double denom = 1.0 + beta_ * d;
    r.emplace_back(tree_.parent[v], 1.0 / denom);
    for (auto c : ch) r.emplace_back(c, beta_ / denom);
    return r;
}

std::vector<double> exact_hit_probability(const AbsorptionProblem& problem) {
    return solve_free(problem, true);
}

std::vector<double> exact_expected_hitting_time(const AbsorptionProblem& problem) {
    return solve_free(problem, false);
}

double exact_hit_probability_after_step(const AbsorptionProblem& problem, std::size_t start) {
    auto h = exact_hit_probability(problem);
    double r = 0.0;
    for (auto [w, p] : problem.row(start)) r += p * h[w];
    return r;
}

double exact_expected_time_after_step(const AbsorptionProblem& problem, std::size_t start) {
    auto t = exact_expected_hitting_time(problem);
    double r = 1.0;
    for (auto [w, p] : problem.row(start)) r += p * t[w];
    return r;
}

double last_residual() { return g_residual; }

std::map<std::string, double> enumerate_height_conditioned(const OffspringLaw& law, int height) {
    if (law.family() != Family::Finite) throw DomainError("enumeration needs a finite-support law");
    if (height < 0 || height > 3) throw DomainError("enumeration supports 0 <= H <= 3");
    constexpr std::size_t kGuard = 10'000'000;
    const auto& p = law.finite_pmf();
    // shapes of height <= h
    std::vector<Shape> below{{"()", p[0], 0}};
    for (int h = 1; h <= height; ++h) {
        std::vector<Shape> next{{"()", p[0], 0}};
        for (std::size_t k = 1; k < p.size(); ++k) {
            if (p[k] == 0.0) continue;
            std::vector<Shape> seqs{{"", p[k], -1}};
            for (std::size_t c = 0; c < k; ++c) {
                std::vector<Shape> grown;
                for (const auto& s : seqs)
                    for (const auto& b : below) {
                        grown.push_back({s.code + b.code, s.probability * b.probability, std::max(s.height, b.height)});
                        if (grown.size() > kGuard) throw ExplosionGuard("more than 1e7 tree shapes");
                    }
                seqs.swap(grown);
            }
            for (auto& s : seqs) next.push_back({"(" + s.code + ")", s.probability, s.height + 1});
            if (next.size() > kGuard) throw ExplosionGuard("more than 1e7 tree shapes");
        }
        below.swap(next);
    }
    double z = 0.0;
    for (const auto& s : below)
        if (s.height == height) z += s.probability;
    if (!(z > 0.0)) throw ImpossibleHeight("no tree of this height under the law");
    std::map<std::string, double> out;
    for (const auto& s : below)
        if (s.height == height) out[s.code] += s.probability / z;
    return out;
}

std::string shape_code(const Tree& tree, NodeId x) {
    const Node& n = tree.node(x);
    std::string s = "(";
    for (std::uint32_t i = 0; i < n.n_backbone; ++i) s += shape_code(tree, n.first_backbone + i);
    for (std::uint64_t j = 0; j < n.n_explicit; ++j) {
        NodeId c = tree.peek_explicit_child(x, j);
        if (c == kNoNode) throw IncompleteExpansion("shape_code: subtree not fully grown");
        s += shape_code(tree, c);
    }
    for (std::uint64_t l = 0; l < n.n_leaves; ++l) s += "()";
    return s + ")";
}

}  // namespace gwe::oracle
