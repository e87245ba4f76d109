#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mslik/errors.hpp"
#include "mslik/rng.hpp"

namespace mslik {

// Half-open run of sample cells [start, end) in leaf-index units.
struct Interval {
    int start = 0;
    int end = 0;

    int length() const { return end - start; }
    bool contains(const Interval& other) const { return start <= other.start && other.end <= end; }
    bool operator==(const Interval&) const = default;
};

inline std::string to_string(const Interval& iv) {
    return "[" + std::to_string(iv.start) + "," + std::to_string(iv.end) + ")";
}

// Fraction of the parent covered by the left child: rho = N_l / N_I.
// This is the "trivial" binomial success probability of a split.
inline double split_rho(const Interval& parent, int split) {
    return static_cast<double>(split - parent.start) / static_cast<double>(parent.length());
}

// Conditional variance factor of a split: c = N_l * N_r / N_I.
inline double split_var_factor(const Interval& parent, int split) {
    const double nl = split - parent.start;
    const double nr = parent.end - split;
    return nl * nr / static_cast<double>(parent.length());
}

struct TreeNode {
    Interval cell;
    int split = -1;  // -1 marks a leaf
    int left = -1;
    int right = -1;

    bool leaf() const { return split < 0; }
    bool operator==(const TreeNode&) const = default;
};

namespace detail {
class TreeBuilder;
}

// Immutable binary split hierarchy of [0, n_leaves). A tree whose leaves
// are all unit cells is a complete recursive partition; partial trees
// (built from fewer splits) represent intermediate partitions. Nodes are
// stored in preorder, so node 0 is the root and children always have
// larger ids than their parent. Copies share storage.
class PartitionTree {
  public:
    int size() const { return static_cast<int>(nodes_->size()); }
    int root() const { return 0; }
    const TreeNode& node(int id) const { return (*nodes_)[static_cast<std::size_t>(id)]; }
    int n_leaves() const { return node(0).cell.length(); }

    bool complete() const {
        for (const auto& nd : *nodes_) {
            if (nd.leaf() && nd.cell.length() != 1) return false;
        }
        return true;
    }

    // Complete, power-of-two size, every split at the midpoint.
    bool dyadic() const {
        const int n = n_leaves();
        if (n < 1 || (n & (n - 1)) != 0) return false;
        for (const auto& nd : *nodes_) {
            if (nd.leaf()) {
                if (nd.cell.length() != 1) return false;
            } else if (2 * nd.split != nd.cell.start + nd.cell.end) {
                return false;
            }
        }
        return true;
    }

    // Ids of nonterminal (split) nodes, in preorder.
    std::vector<int> internal_ids() const {
        std::vector<int> ids;
        ids.reserve(nodes_->size() / 2);
        for (int id = 0; id < size(); ++id) {
            if (!node(id).leaf()) ids.push_back(id);
        }
        return ids;
    }

    // Leaf cells in left-to-right order.
    std::vector<Interval> leaf_cells() const {
        std::vector<Interval> cells;
        std::vector<int> stack = {0};
        while (!stack.empty()) {
            const int id = stack.back();
            stack.pop_back();
            const TreeNode& nd = node(id);
            if (nd.leaf()) {
                cells.push_back(nd.cell);
            } else {
                stack.push_back(nd.right);
                stack.push_back(nd.left);
            }
        }
        return cells;
    }

    // Locate the node holding `iv` by walking split points from the root.
    // Returns -1 when the interval is not a node of this tree.
    int find(const Interval& iv) const {
        int id = 0;
        while (true) {
            const TreeNode& nd = node(id);
            if (nd.cell == iv) return id;
            if (nd.leaf() || !nd.cell.contains(iv)) return -1;
            id = iv.end <= nd.split ? nd.left : (iv.start >= nd.split ? nd.right : -1);
            if (id < 0) return -1;
        }
    }

    bool operator==(const PartitionTree& other) const {
        return nodes_ == other.nodes_ || *nodes_ == *other.nodes_;
    }

  private:
    explicit PartitionTree(std::vector<TreeNode> nodes)
        : nodes_(std::make_shared<const std::vector<TreeNode>>(std::move(nodes))) {}

    std::shared_ptr<const std::vector<TreeNode>> nodes_;

    friend class detail::TreeBuilder;
};

namespace detail {

// Accumulates nodes in preorder and validates tiling before sealing.
class TreeBuilder {
  public:
    int add_leaf(const Interval& iv) {
        if (iv.start < 0 || iv.length() < 1) throw invalid_argument("degenerate interval " + mslik::to_string(iv));
        nodes_.push_back(TreeNode{iv, -1, -1, -1});
        return static_cast<int>(nodes_.size()) - 1;
    }

    // Turn an existing leaf into an internal node.
    void split_leaf(int id, int split, int left, int right) {
        TreeNode& nd = nodes_[static_cast<std::size_t>(id)];
        nd.split = split;
        nd.left = left;
        nd.right = right;
    }

    TreeNode& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }

    PartitionTree finish() {
        for (std::size_t id = 0; id < nodes_.size(); ++id) {
            const TreeNode& nd = nodes_[id];
            if (nd.leaf()) continue;
            const TreeNode& l = nodes_[static_cast<std::size_t>(nd.left)];
            const TreeNode& r = nodes_[static_cast<std::size_t>(nd.right)];
            const bool tiles = l.cell.start == nd.cell.start && l.cell.end == nd.split &&
                               r.cell.start == nd.split && r.cell.end == nd.cell.end;
            if (!tiles || nd.split <= nd.cell.start || nd.split >= nd.cell.end) {
                throw invalid_split("children do not tile parent at " + mslik::to_string(nd.cell));
            }
        }
        return PartitionTree(std::move(nodes_));
    }

    // Recursively append a full midpoint-split subtree.
    int add_dyadic(const Interval& iv) {
        const int id = add_leaf(iv);
        if (iv.length() > 1) {
            const int mid = iv.start + iv.length() / 2;
            const int l = add_dyadic({iv.start, mid});
            const int r = add_dyadic({mid, iv.end});
            split_leaf(id, mid, l, r);
        }
        return id;
    }

    // Append a left-comb complete subtree (peels the leftmost cell).
    // Iterative: the comb can be as deep as the interval is long.
    int add_left_comb(const Interval& iv) {
        const int top = add_leaf(iv);
        int id = top;
        Interval cur = iv;
        while (cur.length() > 1) {
            const int l = add_leaf({cur.start, cur.start + 1});
            const int r = add_leaf({cur.start + 1, cur.end});
            split_leaf(id, cur.start + 1, l, r);
            id = r;
            cur = {cur.start + 1, cur.end};
        }
        return top;
    }

  private:
    std::vector<TreeNode> nodes_;
};

}  // namespace detail

// Complete recursive dyadic partition of a power-of-two grid.
inline PartitionTree dyadic_crp(int n_leaves) {
    if (n_leaves < 1 || (n_leaves & (n_leaves - 1)) != 0) {
        throw invalid_argument("dyadic_crp requires a power-of-two leaf count, got " +
                               std::to_string(n_leaves));
    }
    detail::TreeBuilder b;
    b.add_dyadic({0, n_leaves});
    return b.finish();
}

// Complete left-comb recursive partition; the canonical tree used where
// any complete recursive partition would do (cascades, multinomial draws).
inline PartitionTree left_comb_crp(int n_leaves) {
    if (n_leaves < 1) throw invalid_argument("left_comb_crp requires n_leaves >= 1");
    detail::TreeBuilder b;
    b.add_left_comb({0, n_leaves});
    return b.finish();
}

// Apply splits in order, each targeting a current leaf at an interior
// point. Supplying n_leaves - 1 splits yields a complete recursive
// partition; fewer yields a partial tree.
inline PartitionTree crp_from_splits(int n_leaves,
                                     std::span<const std::pair<Interval, int>> splits) {
    if (n_leaves < 1) throw invalid_argument("crp_from_splits requires n_leaves >= 1");
    detail::TreeBuilder b;
    b.add_leaf({0, n_leaves});
    for (const auto& [iv, split] : splits) {
        // Locate the current leaf equal to iv.
        int target = -1;
        {
            int id = 0;
            while (true) {
                TreeNode& nd = b.node(id);
                if (nd.cell == iv && nd.leaf()) {
                    target = id;
                    break;
                }
                if (nd.leaf() || !nd.cell.contains(iv)) break;
                id = iv.end <= nd.split ? nd.left : (iv.start >= nd.split ? nd.right : -1);
                if (id < 0) break;
            }
        }
        if (target < 0) throw invalid_split("split target " + to_string(iv) + " is not a current leaf");
        if (split <= iv.start || split >= iv.end) {
            throw invalid_split("split point " + std::to_string(split) + " not interior to " + to_string(iv));
        }
        const int l = b.add_leaf({iv.start, split});
        const int r = b.add_leaf({split, iv.end});
        b.split_leaf(target, split, l, r);
    }
    return b.finish();
}

namespace detail {

inline void append_subtree(TreeBuilder& b, int id, const PartitionTree& src, int src_id) {
    const TreeNode& nd = src.node(src_id);
    if (nd.leaf()) return;
    const int l = b.add_leaf(src.node(nd.left).cell);
    const int r = b.add_leaf(src.node(nd.right).cell);
    b.split_leaf(id, nd.split, l, r);
    append_subtree(b, l, src, nd.left);
    append_subtree(b, r, src, nd.right);
}

inline void enumerate_crps_rec(const Interval& iv, std::vector<PartitionTree>& out);

}  // namespace detail

// Every distinct complete recursive partition of the grid, exactly once
// (Catalan(n_leaves - 1) trees). Test-scale oracle; capped at n = 10.
inline std::vector<PartitionTree> enumerate_crps(int n_leaves) {
    if (n_leaves < 1) throw invalid_argument("enumerate_crps requires n_leaves >= 1");
    if (n_leaves > 10) {
        throw resource_limit("enumerate_crps capped at n_leaves = 10, got " + std::to_string(n_leaves));
    }
    std::vector<PartitionTree> out;
    detail::enumerate_crps_rec({0, n_leaves}, out);
    return out;
}

namespace detail {

inline void enumerate_crps_rec(const Interval& iv, std::vector<PartitionTree>& out) {
    if (iv.length() == 1) {
        TreeBuilder b;
        b.add_leaf(iv);
        out.push_back(b.finish());
        return;
    }
    for (int s = iv.start + 1; s < iv.end; ++s) {
        std::vector<PartitionTree> lefts, rights;
        enumerate_crps_rec({iv.start, s}, lefts);
        enumerate_crps_rec({s, iv.end}, rights);
        for (const auto& lt : lefts) {
            for (const auto& rt : rights) {
                TreeBuilder b;
                const int id = b.add_leaf(iv);
                const int l = b.add_leaf({iv.start, s});
                const int r = b.add_leaf({s, iv.end});
                b.split_leaf(id, s, l, r);
                append_subtree(b, l, lt, 0);
                append_subtree(b, r, rt, 0);
                out.push_back(b.finish());
            }
        }
    }
}

}  // namespace detail

// Uniformly random interior split at every level. Not uniform over tree
// shapes, which is fine for randomized identity checks.
inline PartitionTree random_crp(int n_leaves, Rng& rng) {
    if (n_leaves < 1) throw invalid_argument("random_crp requires n_leaves >= 1");
    detail::TreeBuilder b;
    const auto build = [&](auto&& self, const Interval& iv) -> int {
        const int id = b.add_leaf(iv);
        if (iv.length() > 1) {
            const int s = iv.start + 1 +
                          static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(iv.length() - 1));
            const int l = self(self, {iv.start, s});
            const int r = self(self, {s, iv.end});
            b.split_leaf(id, s, l, r);
        }
        return id;
    };
    build(build, {0, n_leaves});
    return b.finish();
}

// True when `fine` extends `coarse`'s split history (coarse precedes fine
// in a common recursive refinement). Every leaf cell of `coarse` is then
// a union of leaf cells of `fine`. Partial order on trees of one grid.
inline bool is_refinement(const PartitionTree& coarse, const PartitionTree& fine) {
    if (coarse.node(0).cell != fine.node(0).cell) {
        throw invalid_argument("is_refinement requires a common root interval");
    }
    const auto walk = [&](auto&& self, int cid, int fid) -> bool {
        const TreeNode& c = coarse.node(cid);
        if (c.leaf()) return true;
        const TreeNode& f = fine.node(fid);
        if (f.leaf() || f.split != c.split) return false;
        return self(self, c.left, f.left) && self(self, c.right, f.right);
    };
    return walk(walk, 0, 0);
}

// Unbalanced Haar step function attached to one split (two-valued on the
// parent, zero outside): value -c'/N_l on the left child, +c'/N_r on the
// right, with c' = (1/N_l + 1/N_r)^(-1/2). Unit norm, zero mean.
struct HaarVector {
    Interval parent;
    int split = 0;
    double norm_const = 0.0;  // c'
    double left_value = 0.0;
    double right_value = 0.0;

    double operator()(int i) const {
        if (i < parent.start || i >= parent.end) return 0.0;
        return i < split ? left_value : right_value;
    }
};

inline HaarVector haar_vector(const Interval& parent, int split) {
    if (split <= parent.start || split >= parent.end) {
        throw invalid_split("haar split " + std::to_string(split) + " not interior to " + to_string(parent));
    }
    const double nl = split - parent.start;
    const double nr = parent.end - split;
    HaarVector h;
    h.parent = parent;
    h.split = split;
    h.norm_const = 1.0 / std::sqrt(1.0 / nl + 1.0 / nr);
    h.left_value = -h.norm_const / nl;
    h.right_value = h.norm_const / nr;
    return h;
}

// <x, h> = c' * (S_r / N_r - S_l / N_l), the discrete inner product.
inline double haar_coefficient(std::span<const double> x, const HaarVector& h) {
    if (static_cast<int>(x.size()) < h.parent.end) {
        throw invalid_argument("grid vector shorter than haar support");
    }
    double sl = 0.0, sr = 0.0;
    for (int i = h.parent.start; i < h.split; ++i) sl += x[static_cast<std::size_t>(i)];
    for (int i = h.split; i < h.parent.end; ++i) sr += x[static_cast<std::size_t>(i)];
    return h.left_value * sl + h.right_value * sr;
}

// Aggregates X_I over every interval of a partition tree; parent sums
// equal the sum of their children by construction.
class SumPyramid {
  public:
    const PartitionTree& tree() const { return tree_; }
    double value(int node_id) const { return sums_[static_cast<std::size_t>(node_id)]; }

    double value(const Interval& iv) const {
        const int id = tree_.find(iv);
        if (id < 0) throw invalid_argument("interval " + to_string(iv) + " is not a node of the tree");
        return sums_[static_cast<std::size_t>(id)];
    }

    double root_sum() const { return sums_[0]; }

  private:
    SumPyramid(PartitionTree tree, std::vector<double> sums)
        : tree_(std::move(tree)), sums_(std::move(sums)) {}

    PartitionTree tree_;
    std::vector<double> sums_;

    friend SumPyramid sum_pyramid(std::span<const double>, const PartitionTree&);
};

inline SumPyramid sum_pyramid(std::span<const double> x, const PartitionTree& tree) {
    if (static_cast<int>(x.size()) != tree.n_leaves()) {
        throw invalid_argument("grid vector length does not match tree root");
    }
    std::vector<double> sums(static_cast<std::size_t>(tree.size()), 0.0);
    // Children precede nothing: ids are preorder, so a reverse sweep sees
    // children before parents.
    for (int id = tree.size() - 1; id >= 0; --id) {
        const TreeNode& nd = tree.node(id);
        if (nd.leaf()) {
            double s = 0.0;
            for (int i = nd.cell.start; i < nd.cell.end; ++i) s += x[static_cast<std::size_t>(i)];
            sums[static_cast<std::size_t>(id)] = s;
        } else {
            sums[static_cast<std::size_t>(id)] =
                sums[static_cast<std::size_t>(nd.left)] + sums[static_cast<std::size_t>(nd.right)];
        }
    }
    return SumPyramid(tree, std::move(sums));
}

}  // namespace mslik
