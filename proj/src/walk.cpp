#include "gwe/walk.hpp"

#include <algorithm>
#include <cmath>

#include "gwe/errors.hpp"

namespace gwe {

Transition transition_probabilities(const Tree& tree, NodeId x, double beta) {
    const std::uint64_t d = tree.node(x).degree();
    if (x == tree.root()) return {0.0, d ? 1.0 / static_cast<double>(d) : 0.0, d};
    const double w = 1.0 + beta * static_cast<double>(d);
    return {1.0 / w, beta / w, d};
}

Walker::Walker(Tree& tree, WalkOptions options, Engine engine)
    : tree_(tree), opt_(std::move(options)), engine_(std::move(engine)) {
    if (!(opt_.beta > 0.0)) throw DomainError("walk: beta must be positive");
    std::sort(opt_.levels.begin(), opt_.levels.end());
    opt_.levels.erase(std::unique(opt_.levels.begin(), opt_.levels.end()), opt_.levels.end());
    std::sort(opt_.checkpoints.begin(), opt_.checkpoints.end());
    opt_.checkpoints.erase(std::unique(opt_.checkpoints.begin(), opt_.checkpoints.end()), opt_.checkpoints.end());
    run_.beta = opt_.beta;
    run_.step_budget = opt_.step_budget;
    run_.levels = opt_.levels;
    run_.hitting.assign(opt_.levels.size(), std::nullopt);
    run_.checkpoints = opt_.checkpoints;
    run_.distance.assign(opt_.checkpoints.size(), std::nullopt);
    place(tree_.root());
}

void Walker::place(NodeId x) {
    run_.position = x;
    run_.in_leaf = false;
    exc_open_ = false;
    const Node& n = tree_.node(x);
    if (n.role == Role::Backbone) arrive_backbone(n);
    record_checkpoints();
}

void Walker::arrive_backbone(const Node& n) {
    if (n.depth > run_.max_backbone_level) run_.max_backbone_level = n.depth;
    while (next_level_ < opt_.levels.size() && opt_.levels[next_level_] <= run_.max_backbone_level) {
        run_.hitting[next_level_] = run_.steps;
        ++next_level_;
    }
}

void Walker::record_checkpoints() {
    while (next_checkpoint_ < opt_.checkpoints.size() && opt_.checkpoints[next_checkpoint_] <= run_.steps) {
        if (opt_.checkpoints[next_checkpoint_] == run_.steps)
            run_.distance[next_checkpoint_] = tree_.node(run_.position).depth + (run_.in_leaf ? 1 : 0);
        ++next_checkpoint_;
    }
}

void Walker::step() {
    if (run_.steps >= opt_.step_budget) {
        run_.budget_exhausted = true;
        throw BudgetExceeded("step budget exhausted");
    }
    const NodeId x = run_.position;
    ++run_.steps;
    if (run_.in_leaf) {
        run_.in_leaf = false;
        const Node& n = tree_.node(x);
        if (exc_open_ && n.role == Role::Backbone) {
            run_.excursions[exc_key_].durations.push_back(run_.steps - exc_start_);
            exc_open_ = false;
        }
        record_checkpoints();
        return;
    }
    const Node& n = tree_.node(x);
    const std::uint64_t d = n.degree();
    const double u = uniform_open(engine_);
    std::uint64_t c;
    if (x == tree_.root()) {
        if (d == 0) {
            record_checkpoints();
            return;
        }
        c = std::min(static_cast<std::uint64_t>(u * static_cast<double>(d)), d - 1);
    } else {
        const double v = u * (1.0 + opt_.beta * static_cast<double>(d));
        if (v < 1.0) {
            const NodeId p = n.parent;
            const bool from_bud = n.role == Role::Bud;
            run_.position = p;
            const Node& pn = tree_.node(p);
            if (pn.role == Role::Backbone) {
                if (from_bud && exc_open_) {
                    run_.excursions[exc_key_].durations.push_back(run_.steps - exc_start_);
                    exc_open_ = false;
                }
                arrive_backbone(pn);
            }
            record_checkpoints();
            return;
        }
        c = std::min(static_cast<std::uint64_t>((v - 1.0) / opt_.beta), d - 1);
    }
    const std::uint32_t nb = n.n_backbone;
    const std::uint64_t ne = n.n_explicit;
    const bool at_backbone = n.role == Role::Backbone;
    if (c < nb) {
        const NodeId y = tree_.backbone_child(x, static_cast<std::uint32_t>(c));
        run_.position = y;
        arrive_backbone(tree_.node(y));
    } else {
        if (at_backbone && opt_.track_excursions) {
            exc_open_ = true;
            exc_key_ = {x, c - nb};
            exc_start_ = run_.steps - 1;
            ++run_.excursions[exc_key_].entries;
        }
        if (c < nb + ne)
            run_.position = tree_.explicit_child(x, c - nb);
        else
            run_.in_leaf = true;
    }
    record_checkpoints();
}

bool Walker::run_to_level(std::uint64_t n) {
    while (run_.max_backbone_level < n) {
        if (run_.steps >= opt_.step_budget) {
            run_.budget_exhausted = true;
            return false;
        }
        step();
    }
    return true;
}

bool Walker::run_steps(std::uint64_t m) {
    const std::uint64_t target = std::min(m, opt_.step_budget);
    while (run_.steps < target) step();
    if (m > opt_.step_budget) {
        run_.budget_exhausted = true;
        return false;
    }
    return true;
}

std::uint64_t Walker::run_until_hit(NodeId target) {
    const std::uint64_t start = run_.steps;
    do {
        step();
    } while (run_.position != target || run_.in_leaf);
    return run_.steps - start;
}

WalkRun run_to_level(Tree& tree, double beta, std::uint64_t n, std::uint64_t budget, const SeedStream& stream,
                     std::vector<std::uint64_t> levels) {
    if (std::find(levels.begin(), levels.end(), n) == levels.end()) levels.push_back(n);
    WalkOptions opt;
    opt.beta = beta;
    opt.step_budget = budget;
    opt.levels = std::move(levels);
    Walker w(tree, std::move(opt), stream.engine());
    w.run_to_level(n);
    return w.take();
}

WalkRun run_for_steps(Tree& tree, double beta, std::uint64_t m, std::vector<std::uint64_t> checkpoints,
                      const SeedStream& stream) {
    if (std::find(checkpoints.begin(), checkpoints.end(), m) == checkpoints.end()) checkpoints.push_back(m);
    WalkOptions opt;
    opt.beta = beta;
    opt.step_budget = std::max<std::uint64_t>(m, 1);
    opt.checkpoints = std::move(checkpoints);
    Walker w(tree, std::move(opt), stream.engine());
    w.run_steps(m);
    return w.take();
}

std::vector<TrapSummary> excursion_stats(const WalkRun& run) {
    std::vector<TrapSummary> out;
    out.reserve(run.excursions.size());
    for (const auto& [k, r] : run.excursions) out.push_back({k, r.entries, r.durations});
    return out;
}

std::vector<std::uint64_t> dyadic_levels(std::uint64_t lo, std::uint64_t hi) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t v = 1; v <= hi && v != 0; v <<= 1)
        if (v >= lo) out.push_back(v);
    if (out.empty() || out.back() != hi) out.push_back(hi);
    return out;
}

}  // namespace gwe
