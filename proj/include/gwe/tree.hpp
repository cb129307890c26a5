#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "gwe/distributions.hpp"

namespace gwe {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();
inline constexpr std::uint64_t kDefaultNodeBudget = 20'000'000;

enum class Role : std::uint8_t { Backbone, Bud, Trap };
const char* role_name(Role r);

enum class ChildState : std::uint8_t { Pending, Dense, Sparse };

// Children of a node are laid out as [backbone | explicit | implicit leaves].
// Explicit children are real nodes; leaves are only counted.
struct Node {
    std::uint64_t seed = 0;
    std::uint64_t n_explicit = 0;
    std::uint64_t n_leaves = 0;
    NodeId parent = kNoNode;
    NodeId first_backbone = kNoNode;
    NodeId first_explicit = kNoNode;  // dense block start
    std::uint32_t n_backbone = 0;
    std::uint32_t depth = 0;
    Role role = Role::Trap;
    ChildState state = ChildState::Pending;
    bool frozen = false;  // depth cap reached; children are never materialized

    std::uint64_t degree() const { return n_backbone + n_explicit + n_leaves; }
};

enum class TreeKind : std::uint8_t { Fixed, GaltonWatson, Kesten, Supercritical };

class Tree {
public:
    // Tree from a parent array (parent[root] = kNoNode); node ids are relabeled breadth-first.
    struct Built;
    static Built from_parents(const std::vector<NodeId>& parents, const std::vector<Role>& roles);

    // Lazily grown trees; see samplers.hpp for the public entry points.
    static Tree galton_watson(const OffspringLaw& law, std::uint32_t max_depth, std::uint64_t seed,
                              std::uint64_t node_budget = kDefaultNodeBudget);
    static Tree kesten(const OffspringLaw& law, std::uint64_t seed,
                       std::uint64_t node_budget = kDefaultNodeBudget);
    static Tree supercritical(const OffspringLaw& law, double q, std::uint64_t seed,
                              std::uint64_t node_budget = kDefaultNodeBudget);

    TreeKind kind() const { return kind_; }
    NodeId root() const { return 0; }
    std::size_t size() const { return nodes_.size(); }
    const Node& node(NodeId x) const { return nodes_[x]; }
    std::uint64_t node_budget() const { return node_budget_; }

    void expand(NodeId x);
    NodeId backbone_child(NodeId x, std::uint32_t i);
    NodeId explicit_child(NodeId x, std::uint64_t j);
    // Materialized explicit child or kNoNode; never grows the tree.
    NodeId peek_explicit_child(NodeId x, std::uint64_t j) const;
    bool expanded(NodeId x) const;
    // Grow the whole subtree below x. Throws InfiniteTree if it meets a backbone child.
    void expand_subtree(NodeId x);
    // Grow the backbone down to the given depth (Kesten or supercritical).
    void extend_backbone(std::uint32_t depth);

    // Unexpanded nodes that still have children to materialize.
    std::vector<NodeId> frontier() const;
    bool subtree_complete(NodeId x) const;

    // Generation sizes of the subtree below x, leaves included (index 0 is x itself).
    std::vector<std::uint64_t> generation_sizes(NodeId x) const;
    std::vector<std::uint64_t> backbone_generation_sizes() const;
    std::uint32_t subtree_height(NodeId x) const;

    const OffspringLaw& law() const { return law_; }
    const OffspringLaw& trap_law() const { return trap_law_; }
    double extinction() const { return q_; }

    // Flattened explicit form with leaves materialized; order is parent-before-child.
    struct Flat {
        std::vector<std::uint64_t> parent;  // parent of root is max
        std::vector<Role> role;
        std::vector<std::uint32_t> depth;
        std::vector<NodeId> arena_id;  // kNoNode for implicit leaves
    };
    Flat flatten() const;
    void dump_jsonl(std::ostream& os) const;

    void reset_to_root(std::uint64_t seed);

private:
    Tree() = default;
    NodeId add_node(NodeId parent, Role role, std::uint32_t depth, std::uint64_t seed);
    void birth(NodeId x);
    void materialize(NodeId x);
    void reserve_ids(std::uint64_t extra) const;

    TreeKind kind_ = TreeKind::Fixed;
    std::vector<Node> nodes_;
    std::unordered_map<NodeId, std::unordered_map<std::uint64_t, NodeId>> sparse_;
    OffspringLaw law_ = OffspringLaw::finite({1.0});
    OffspringLaw trap_law_ = OffspringLaw::finite({1.0});
    std::optional<SizeBiasedLaw> spine_law_;
    double q_ = 1.0;
    double trap_p0_ = 1.0;
    std::uint32_t max_depth_ = std::numeric_limits<std::uint32_t>::max();
    std::uint64_t node_budget_ = kDefaultNodeBudget;
};

struct Tree::Built {
    Tree tree;
    std::vector<NodeId> id_of;  // input index -> arena id
};

Tree load_tree_jsonl(std::istream& is);

}  // namespace gwe
