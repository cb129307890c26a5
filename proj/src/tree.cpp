#include "gwe/tree.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include <json.hpp>

#include "gwe/errors.hpp"

namespace gwe {
namespace {

constexpr std::uint64_t kDenseLimit = 4096;
constexpr std::uint64_t kBackboneSalt = 0xb4cb0e5a17c0ffeeULL;

template <class G>
std::uint64_t binomial(G& g, std::uint64_t n, double p) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    return std::binomial_distribution<std::uint64_t>(n, p)(g);
}

}  // namespace

const char* role_name(Role r) {
    switch (r) {
        case Role::Backbone: return "backbone";
        case Role::Bud: return "bud";
        case Role::Trap: return "trap";
    }
    return "?";
}

Tree::Built Tree::from_parents(const std::vector<NodeId>& parents, const std::vector<Role>& roles) {
    const std::size_t n = parents.size();
    if (n == 0) throw DomainError("from_parents: empty tree");
    if (!roles.empty() && roles.size() != n) throw DomainError("from_parents: role count mismatch");
    auto role_of = [&](std::size_t i) { return roles.empty() ? Role::Trap : roles[i]; };
    std::vector<std::vector<NodeId>> children(n);
    std::size_t root = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (parents[i] == kNoNode) {
            if (root != n) throw DomainError("from_parents: more than one root");
            root = i;
        } else {
            if (parents[i] >= n) throw DomainError("from_parents: parent id out of range");
            children[parents[i]].push_back(static_cast<NodeId>(i));
        }
    }
    if (root == n) throw DomainError("from_parents: no root");
    for (auto& c : children)
        std::stable_partition(c.begin(), c.end(), [&](NodeId v) { return role_of(v) == Role::Backbone; });

    Built out{Tree(), std::vector<NodeId>(n, kNoNode)};
    Tree& t = out.tree;
    t.kind_ = TreeKind::Fixed;
    t.nodes_.reserve(n);
    std::vector<NodeId> order{static_cast<NodeId>(root)};
    out.id_of[root] = 0;
    t.nodes_.push_back(Node{});
    t.nodes_[0].role = role_of(root);
    for (std::size_t head = 0; head < order.size(); ++head) {
        const NodeId src = order[head];
        const NodeId me = out.id_of[src];
        const auto& c = children[src];
        NodeId first = static_cast<NodeId>(t.nodes_.size());
        std::uint32_t nb = 0;
        for (NodeId v : c) {
            if (out.id_of[v] != kNoNode) throw DomainError("from_parents: cycle");
            out.id_of[v] = static_cast<NodeId>(t.nodes_.size());
            Node child;
            child.parent = me;
            child.depth = t.nodes_[me].depth + 1;
            child.role = role_of(v);
            t.nodes_.push_back(child);
            order.push_back(v);
            if (child.role == Role::Backbone) ++nb;
        }
        Node& m = t.nodes_[me];
        m.state = ChildState::Dense;
        m.n_backbone = nb;
        m.n_explicit = c.size() - nb;
        m.first_backbone = nb ? first : kNoNode;
        m.first_explicit = first + nb;
    }
    if (order.size() != n) throw DomainError("from_parents: nodes unreachable from the root");
    return out;
}

Tree Tree::galton_watson(const OffspringLaw& law, std::uint32_t max_depth, std::uint64_t seed,
                         std::uint64_t node_budget) {
    Tree t;
    t.kind_ = TreeKind::GaltonWatson;
    t.law_ = law;
    t.trap_law_ = law;
    t.trap_p0_ = law.p0();
    t.max_depth_ = max_depth;
    t.node_budget_ = node_budget;
    t.reset_to_root(seed);
    return t;
}

Tree Tree::kesten(const OffspringLaw& law, std::uint64_t seed, std::uint64_t node_budget) {
    if (!(law.mean() < 1.0)) throw DomainError("kesten tree: offspring mean must be < 1");
    Tree t;
    t.kind_ = TreeKind::Kesten;
    t.law_ = law;
    t.trap_law_ = law;
    t.trap_p0_ = law.p0();
    t.spine_law_.emplace(law);
    t.node_budget_ = node_budget;
    t.reset_to_root(seed);
    return t;
}

Tree Tree::supercritical(const OffspringLaw& law, double q, std::uint64_t seed, std::uint64_t node_budget) {
    if (!(law.mean() > 1.0)) throw DomainError("supercritical tree: offspring mean must be > 1");
    if (!(q >= 0.0 && q < 1.0)) throw DomainError("supercritical tree: need 0 <= q < 1");
    Tree t;
    t.kind_ = TreeKind::Supercritical;
    t.law_ = law;
    t.q_ = q;
    t.trap_law_ = law.tilted(q);
    t.trap_p0_ = t.trap_law_.p0();
    t.node_budget_ = node_budget;
    t.reset_to_root(seed);
    return t;
}

void Tree::reset_to_root(std::uint64_t seed) {
    nodes_.clear();
    sparse_.clear();
    Role r = (kind_ == TreeKind::Kesten || kind_ == TreeKind::Supercritical) ? Role::Backbone : Role::Trap;
    add_node(kNoNode, r, 0, seed);
}

void Tree::reserve_ids(std::uint64_t extra) const {
    if (nodes_.size() + extra > node_budget_ || nodes_.size() + extra >= kNoNode)
        throw BudgetExceeded("node budget of " + std::to_string(node_budget_) + " exceeded");
}

NodeId Tree::add_node(NodeId parent, Role role, std::uint32_t depth, std::uint64_t seed) {
    reserve_ids(1);
    NodeId id = static_cast<NodeId>(nodes_.size());
    Node n;
    n.parent = parent;
    n.role = role;
    n.depth = depth;
    n.seed = seed;
    nodes_.push_back(n);
    birth(id);
    return id;
}

void Tree::birth(NodeId x) {
    Node& n = nodes_[x];
    SplitMix64 g(n.seed);
    if (n.role == Role::Backbone) {
        std::uint64_t buds = 0;
        if (kind_ == TreeKind::Kesten) {
            n.n_backbone = 1;
            buds = spine_law_->sample(g) - 1;
        } else {
            std::uint64_t xi = 0, nb = 0;
            do {
                xi = law_.sample(g);
                nb = binomial(g, xi, 1.0 - q_);
            } while (nb == 0);
            if (nb > node_budget_) throw BudgetExceeded("backbone branching exceeds node budget");
            n.n_backbone = static_cast<std::uint32_t>(nb);
            buds = xi - nb;
        }
        n.n_leaves = binomial(g, buds, trap_p0_);
        n.n_explicit = buds - n.n_leaves;
    } else {
        std::uint64_t deg = (x == 0) ? trap_law_.sample(g) : trap_law_.sample_positive(g);
        n.n_leaves = binomial(g, deg, trap_p0_);
        n.n_explicit = deg - n.n_leaves;
    }
    if (n.depth >= max_depth_ && n.n_backbone + n.n_explicit > 0) n.frozen = true;
    if (n.n_backbone + n.n_explicit == 0) n.state = ChildState::Dense;
}

void Tree::materialize(NodeId x) {
    const Node snapshot = nodes_[x];
    const std::uint64_t dense = snapshot.n_explicit <= kDenseLimit ? snapshot.n_explicit : 0;
    reserve_ids(snapshot.n_backbone + dense);
    const Role child_role = snapshot.role == Role::Backbone ? Role::Bud : Role::Trap;
    const NodeId first = static_cast<NodeId>(nodes_.size());
    for (std::uint32_t i = 0; i < snapshot.n_backbone; ++i)
        add_node(x, Role::Backbone, snapshot.depth + 1, derive_seed(snapshot.seed ^ kBackboneSalt, i));
    for (std::uint64_t j = 0; j < dense; ++j)
        add_node(x, child_role, snapshot.depth + 1, derive_seed(snapshot.seed, j));
    Node& n = nodes_[x];
    n.first_backbone = snapshot.n_backbone ? first : kNoNode;
    n.first_explicit = first + snapshot.n_backbone;
    n.state = snapshot.n_explicit <= kDenseLimit ? ChildState::Dense : ChildState::Sparse;
}

void Tree::expand(NodeId x) {
    const Node& n = nodes_[x];
    if (n.state != ChildState::Pending) return;
    if (n.frozen) throw IncompleteExpansion("node at the depth cap cannot be expanded");
    materialize(x);
}

bool Tree::expanded(NodeId x) const { return nodes_[x].state != ChildState::Pending; }

NodeId Tree::backbone_child(NodeId x, std::uint32_t i) {
    expand(x);
    return nodes_[x].first_backbone + i;
}

NodeId Tree::explicit_child(NodeId x, std::uint64_t j) {
    expand(x);
    const Node& n = nodes_[x];
    if (n.state == ChildState::Dense) return n.first_explicit + static_cast<NodeId>(j);
    auto& m = sparse_[x];
    auto it = m.find(j);
    if (it != m.end()) return it->second;
    const Role child_role = n.role == Role::Backbone ? Role::Bud : Role::Trap;
    const std::uint32_t depth = n.depth + 1;
    const std::uint64_t seed = derive_seed(n.seed, j);
    NodeId id = add_node(x, child_role, depth, seed);
    sparse_[x].emplace(j, id);
    return id;
}

NodeId Tree::peek_explicit_child(NodeId x, std::uint64_t j) const {
    const Node& n = nodes_[x];
    if (n.state == ChildState::Dense) return n.first_explicit + static_cast<NodeId>(j);
    if (n.state == ChildState::Pending) return kNoNode;
    auto it = sparse_.find(x);
    if (it == sparse_.end()) return kNoNode;
    auto jt = it->second.find(j);
    return jt == it->second.end() ? kNoNode : jt->second;
}

void Tree::expand_subtree(NodeId x) {
    std::vector<NodeId> stack{x};
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        if (nodes_[v].n_backbone > 0) throw InfiniteTree("subtree contains a backbone vertex");
        expand(v);
        const std::uint64_t ne = nodes_[v].n_explicit;
        for (std::uint64_t j = 0; j < ne; ++j) stack.push_back(explicit_child(v, j));
    }
}

void Tree::extend_backbone(std::uint32_t depth) {
    if (kind_ != TreeKind::Kesten && kind_ != TreeKind::Supercritical) return;
    std::vector<NodeId> level{root()};
    for (std::uint32_t d = 0; d < depth; ++d) {
        std::vector<NodeId> next;
        for (NodeId v : level) {
            expand(v);
            const Node& n = nodes_[v];
            for (std::uint32_t i = 0; i < n.n_backbone; ++i) next.push_back(n.first_backbone + i);
        }
        level.swap(next);
    }
}

std::vector<NodeId> Tree::frontier() const {
    std::vector<NodeId> out;
    for (NodeId x = 0; x < nodes_.size(); ++x) {
        const Node& n = nodes_[x];
        if (n.n_backbone + n.n_explicit == 0) continue;
        if (n.state == ChildState::Pending) {
            out.push_back(x);
        } else if (n.state == ChildState::Sparse) {
            auto it = sparse_.find(x);
            if (it == sparse_.end() || it->second.size() < n.n_explicit) out.push_back(x);
        }
    }
    return out;
}

bool Tree::subtree_complete(NodeId x) const {
    std::vector<NodeId> stack{x};
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        const Node& n = nodes_[v];
        if (n.n_backbone + n.n_explicit == 0) continue;
        if (n.state == ChildState::Pending) return false;
        for (std::uint32_t i = 0; i < n.n_backbone; ++i) stack.push_back(n.first_backbone + i);
        for (std::uint64_t j = 0; j < n.n_explicit; ++j) {
            NodeId c = peek_explicit_child(v, j);
            if (c == kNoNode) return false;
            stack.push_back(c);
        }
    }
    return true;
}

std::vector<std::uint64_t> Tree::generation_sizes(NodeId x) const {
    if (!subtree_complete(x)) throw InfiniteTree("subtree has unexpanded nodes");
    std::vector<std::uint64_t> z;
    std::vector<NodeId> level{x};
    z.push_back(1);
    while (!level.empty()) {
        std::vector<NodeId> next;
        std::uint64_t count = 0;
        for (NodeId v : level) {
            const Node& n = nodes_[v];
            count += n.degree();
            for (std::uint32_t i = 0; i < n.n_backbone; ++i) next.push_back(n.first_backbone + i);
            for (std::uint64_t j = 0; j < n.n_explicit; ++j) next.push_back(peek_explicit_child(v, j));
        }
        if (count == 0) break;
        z.push_back(count);
        level.swap(next);
    }
    return z;
}

std::vector<std::uint64_t> Tree::backbone_generation_sizes() const {
    std::vector<std::uint64_t> z;
    for (const Node& n : nodes_) {
        if (n.role != Role::Backbone) continue;
        if (z.size() <= n.depth) z.resize(n.depth + 1, 0);
        ++z[n.depth];
    }
    return z;
}

std::uint32_t Tree::subtree_height(NodeId x) const {
    return static_cast<std::uint32_t>(generation_sizes(x).size() - 1);
}

Tree::Flat Tree::flatten() const {
    Flat f;
    constexpr std::uint64_t kNone = ~std::uint64_t{0};
    std::deque<std::pair<NodeId, std::uint64_t>> queue{{root(), kNone}};
    while (!queue.empty()) {
        auto [v, parent] = queue.front();
        queue.pop_front();
        const Node& n = nodes_[v];
        const std::uint64_t me = f.parent.size();
        f.parent.push_back(parent);
        f.role.push_back(n.role);
        f.depth.push_back(n.depth);
        f.arena_id.push_back(v);
        if (n.state != ChildState::Pending) {
            for (std::uint32_t i = 0; i < n.n_backbone; ++i) queue.emplace_back(n.first_backbone + i, me);
            for (std::uint64_t j = 0; j < n.n_explicit; ++j) {
                NodeId c = peek_explicit_child(v, j);
                if (c != kNoNode) queue.emplace_back(c, me);
            }
        }
        const Role leaf_role = n.role == Role::Backbone ? Role::Bud : Role::Trap;
        for (std::uint64_t l = 0; l < n.n_leaves; ++l) {
            f.parent.push_back(me);
            f.role.push_back(leaf_role);
            f.depth.push_back(n.depth + 1);
            f.arena_id.push_back(kNoNode);
        }
    }
    return f;
}

void Tree::dump_jsonl(std::ostream& os) const {
    Flat f = flatten();
    for (std::size_t i = 0; i < f.parent.size(); ++i) {
        nlohmann::json j;
        j["id"] = i;
        j["parent"] = f.parent[i] == ~std::uint64_t{0} ? nlohmann::json(nullptr) : nlohmann::json(f.parent[i]);
        j["role"] = role_name(f.role[i]);
        j["depth"] = f.depth[i];
        os << j.dump() << '\n';
    }
}

Tree load_tree_jsonl(std::istream& is) {
    std::vector<NodeId> parents;
    std::vector<Role> roles;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        std::size_t id = j.at("id").get<std::size_t>();
        if (id != parents.size()) throw DomainError("tree dump: ids must be consecutive from 0");
        parents.push_back(j.at("parent").is_null() ? kNoNode : j.at("parent").get<NodeId>());
        std::string r = j.at("role").get<std::string>();
        roles.push_back(r == "backbone" ? Role::Backbone : r == "bud" ? Role::Bud : Role::Trap);
    }
    return Tree::from_parents(parents, roles).tree;
}

}  // namespace gwe
