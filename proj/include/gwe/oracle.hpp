#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gwe/distributions.hpp"
#include "gwe/tree.hpp"

namespace gwe::oracle {

// Finite tree with every vertex explicit.
struct ExplicitTree {
    std::vector<std::size_t> parent;  // npos for the root
    std::vector<std::vector<std::size_t>> children;
    std::size_t root = 0;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    static ExplicitTree from_tree(const Tree& tree);
    static ExplicitTree path(std::size_t edges);  // vertex i at depth i
    std::size_t size() const { return parent.size(); }
    std::size_t depth(std::size_t v) const;
};

class AbsorptionProblem {
public:
    AbsorptionProblem(ExplicitTree tree, double beta, std::vector<std::size_t> target,
                      std::vector<std::size_t> forbidden);

    const ExplicitTree& tree() const { return tree_; }
    double beta() const { return beta_; }
    bool is_target(std::size_t v) const { return kind_[v] == 1; }
    bool is_absorbing(std::size_t v) const { return kind_[v] != 0; }
    // (neighbour, probability) pairs of the walk kernel at v
    std::vector<std::pair<std::size_t, double>> row(std::size_t v) const;

private:
    ExplicitTree tree_;
    double beta_;
    std::vector<char> kind_;  // 0 free, 1 target, 2 forbidden
};

// P_v(hit target before forbidden); absorbing states report their own indicator.
std::vector<double> exact_hit_probability(const AbsorptionProblem& problem);
// E_v[time to absorption]; zero on absorbing states.
std::vector<double> exact_expected_hitting_time(const AbsorptionProblem& problem);
// Same quantities after forcing one step first, so `start` may itself be absorbing.
double exact_hit_probability_after_step(const AbsorptionProblem& problem, std::size_t start);
double exact_expected_time_after_step(const AbsorptionProblem& problem, std::size_t start);

// Relative residual of the last solve on this thread.
double last_residual();

struct Shape {
    std::string code;  // "(" + children + ")"
    double probability;
    int height;
};
// All ordered trees of height exactly H with their conditional probabilities.
std::map<std::string, double> enumerate_height_conditioned(const OffspringLaw& law, int height);

std::string shape_code(const Tree& tree, NodeId x);

}  // namespace gwe::oracle
