#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "mslik/errors.hpp"
#include "mslik/models.hpp"
#include "mslik/multiscale.hpp"
#include "mslik/partition.hpp"

namespace mslik {

// Complexity penalty lambda = gamma * ln(n_leaves), in nats. The risk
// guarantees ask for gamma >= 3/2 and n >= 3; smaller values are legal
// but flagged.
struct PenaltyConfig {
    double gamma = 0.0;
    int n_leaves = 1;
    double lambda = 0.0;

    PenaltyConfig(double gamma_in, int n_leaves_in) : gamma(gamma_in), n_leaves(n_leaves_in) {
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw invalid_argument("gamma must be finite and >= 0");
        if (n_leaves < 1) throw invalid_argument("n_leaves must be >= 1");
        lambda = gamma * std::log(static_cast<double>(n_leaves));
    }

    bool theory_guarantee() const { return gamma >= 1.5 && n_leaves >= 3; }
};

enum class EstimatorKind { threshold, rdp, rp };

inline std::string_view estimator_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::threshold: return "threshold";
        case EstimatorKind::rdp: return "rdp";
        case EstimatorKind::rp: return "rp";
    }
    return "?";
}

struct PartitionCell {
    Interval cell;
    double value = 0.0;  // per-cell fitted parameter on the cell
};

// A fitted estimate: the parameter vector, the complete recursive
// partition it was computed on, the kept (nontrivial) splits, the
// selected partition (leaves of the kept set's closure), the penalized
// objective in nats, and the per-split cost table.
struct EstimateResult {
    ModelKind model = ModelKind::gaussian;
    double gamma = 0.0;
    ParamVector theta_hat;
    PartitionTree tree;
    std::vector<OmegaEntry> kept;
    std::vector<PartitionCell> partition;
    double objective = 0.0;
    std::vector<NodeCosts> costs;  // one per nonterminal interval of `tree`, preorder
};

// Penalized objective of an arbitrary candidate theta': the negative
// log-likelihood plus 2 * lambda * #{omega_I(theta') nontrivial}, with
// omegas read off against `tree`. Nontrivial means |omega - trivial| >
// 1e-12.
inline double objective(const ObservationVector& x, const ParamVector& theta_prime,
                        const PartitionTree& tree, const ModelSpec& model,
                        const PenaltyConfig& pen) {
    if (x.size() != theta_prime.size()) throw invalid_argument("x/theta length mismatch");
    const MultiscaleParams ms = decompose(theta_prime, tree, model);
    int nontrivial = 0;
    for (const auto& e : ms.entries) {
        if (std::abs(e.omega - trivial_omega(model.kind(), e.parent, e.split)) > 1e-12) ++nontrivial;
    }
    return -loglik_direct(x, theta_prime, model) + 2.0 * pen.lambda * nontrivial;
}

namespace detail {

struct TreeCosts {
    double data_total = 0.0;
    std::vector<int> index_by_id;    // internal-node index, -1 at leaves
    std::vector<NodeCosts> costs;    // preorder over nonterminal intervals
};

inline TreeCosts compute_tree_costs(std::span<const double> xvals, const PartitionTree& tree,
                                    const ModelSpec& model, double lambda) {
    const SumPyramid sums = sum_pyramid(xvals, tree);
    TreeCosts out;
    out.data_total = sums.root_sum();
    out.index_by_id.assign(static_cast<std::size_t>(tree.size()), -1);
    out.costs.reserve(static_cast<std::size_t>(tree.size() / 2));
    const double var = model.kind() == ModelKind::gaussian ? model.variance() : 0.0;
    for (int id = 0; id < tree.size(); ++id) {
        const TreeNode& nd = tree.node(id);
        if (nd.leaf()) continue;
        out.index_by_id[static_cast<std::size_t>(id)] = static_cast<int>(out.costs.size());
        out.costs.push_back(node_costs_from_sums(model.kind(), var, nd.cell, nd.split,
                                                 sums.value(id), sums.value(nd.left), lambda));
    }
    return out;
}

// Assemble an EstimateResult from per-node keep decisions. theta_hat is
// rebuilt through the multiscale reparameterization (root MLE, kept
// omegas at their conditional MLEs, trivial elsewhere), which also
// enforces the model's domain constraints.
inline EstimateResult make_result(const ModelSpec& model, const PenaltyConfig& pen,
                                  const PartitionTree& tree, const TreeCosts& tc,
                                  const std::vector<char>& kept_by_id, double objective_value) {
    const int sz = tree.size();
    std::vector<double> omega_by_id(static_cast<std::size_t>(sz), 0.0);
    std::vector<OmegaEntry> kept_entries;
    for (int id = 0; id < sz; ++id) {
        const int ci = tc.index_by_id[static_cast<std::size_t>(id)];
        if (ci < 0) continue;
        const NodeCosts& c = tc.costs[static_cast<std::size_t>(ci)];
        if (kept_by_id[static_cast<std::size_t>(id)]) {
            omega_by_id[static_cast<std::size_t>(id)] = c.omega_hat;
            kept_entries.push_back({c.parent, c.split, c.omega_hat});
        } else {
            omega_by_id[static_cast<std::size_t>(id)] = trivial_omega(model.kind(), c.parent, c.split);
        }
    }
    const double root_mle = model.kind() == ModelKind::multinomial ? 1.0 : tc.data_total;
    ParamVector theta_hat;
    theta_hat.model = model.kind();
    theta_hat.values = reconstruct_by_node(tree, model.kind(), root_mle, omega_by_id);

    // Leaves of the upward closure of the kept set.
    std::vector<char> has_kept(static_cast<std::size_t>(sz), 0);
    for (int id = sz - 1; id >= 0; --id) {
        const TreeNode& nd = tree.node(id);
        char flag = kept_by_id[static_cast<std::size_t>(id)];
        if (!nd.leaf()) {
            flag = static_cast<char>(flag | has_kept[static_cast<std::size_t>(nd.left)] |
                                     has_kept[static_cast<std::size_t>(nd.right)]);
        }
        has_kept[static_cast<std::size_t>(id)] = flag;
    }
    std::vector<PartitionCell> cells;
    std::vector<int> stack = {0};
    std::vector<std::pair<int, Interval>> pending;  // collected depth-first
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        const TreeNode& nd = tree.node(id);
        if (!nd.leaf() && has_kept[static_cast<std::size_t>(id)]) {
            stack.push_back(nd.right);
            stack.push_back(nd.left);
        } else {
            cells.push_back({nd.cell, theta_hat.values[static_cast<std::size_t>(nd.cell.start)]});
        }
    }

    EstimateResult res{model.kind(), pen.gamma,          std::move(theta_hat), tree,
                       std::move(kept_entries), std::move(cells),     objective_value,
                       tc.costs};
    return res;
}

inline void require_dyadic(const PartitionTree& tree, const ObservationVector& x,
                           const PenaltyConfig& pen) {
    if (!tree.dyadic()) {
        throw invalid_argument(
            "estimator requires a complete recursive dyadic partition (power-of-two grid); pad the "
            "input explicitly");
    }
    if (x.size() != tree.n_leaves()) throw invalid_argument("x length does not match tree");
    if (pen.n_leaves != x.size()) throw invalid_argument("penalty config sized for a different grid");
}

}  // namespace detail

// Keep-or-kill thresholding over the dyadic tree: each split is kept
// exactly when its likelihood-ratio gain strictly exceeds 2 * lambda.
// Linear in the grid size. For the Gaussian model this reduces to hard
// thresholding of the Haar coefficients at 2 * sigma * sqrt(gamma ln N).
inline EstimateResult estimate_threshold(const ObservationVector& x, const ModelSpec& model,
                                         const PenaltyConfig& pen, const PartitionTree& tree) {
    detail::require_dyadic(tree, x, pen);
    validate(x, model);
    const detail::TreeCosts tc = detail::compute_tree_costs(x.values, tree, model, pen.lambda);
    std::vector<char> kept(static_cast<std::size_t>(tree.size()), 0);
    double total = root_coarse_cost(tc.data_total, tree.n_leaves(), model);
    for (int id = 0; id < tree.size(); ++id) {
        const int ci = tc.index_by_id[static_cast<std::size_t>(id)];
        if (ci < 0) continue;
        const NodeCosts& c = tc.costs[static_cast<std::size_t>(ci)];
        if (c.gain() > 2.0 * pen.lambda) {
            kept[static_cast<std::size_t>(id)] = 1;
            total += c.keep_total_cost;
        } else {
            total += c.kill_cost;
        }
    }
    return detail::make_result(model, pen, tree, tc, kept, total);
}

// Optimal pruning of the dyadic tree (the CART recursion): bottom-up,
// each interval either stays unsplit (its whole subtree priced at the
// trivial omegas) or splits and inherits its children's optima plus the
// 2 * lambda price. Ties resolve to the unsplit branch. Linear time.
inline EstimateResult estimate_rdp(const ObservationVector& x, const ModelSpec& model,
                                   const PenaltyConfig& pen, const PartitionTree& tree) {
    detail::require_dyadic(tree, x, pen);
    validate(x, model);
    const detail::TreeCosts tc = detail::compute_tree_costs(x.values, tree, model, pen.lambda);
    const int sz = tree.size();
    std::vector<double> all_trivial(static_cast<std::size_t>(sz), 0.0);
    std::vector<double> opt(static_cast<std::size_t>(sz), 0.0);
    std::vector<char> split_here(static_cast<std::size_t>(sz), 0);
    for (int id = sz - 1; id >= 0; --id) {
        const TreeNode& nd = tree.node(id);
        if (nd.leaf()) continue;
        const NodeCosts& c = tc.costs[static_cast<std::size_t>(tc.index_by_id[static_cast<std::size_t>(id)])];
        const double at = c.kill_cost + all_trivial[static_cast<std::size_t>(nd.left)] +
                          all_trivial[static_cast<std::size_t>(nd.right)];
        const double keep = c.keep_total_cost + opt[static_cast<std::size_t>(nd.left)] +
                            opt[static_cast<std::size_t>(nd.right)];
        all_trivial[static_cast<std::size_t>(id)] = at;
        if (keep < at) {
            opt[static_cast<std::size_t>(id)] = keep;
            split_here[static_cast<std::size_t>(id)] = 1;
        } else {
            opt[static_cast<std::size_t>(id)] = at;
        }
    }
    // Decisions only bind along the selected pruning.
    std::vector<char> kept(static_cast<std::size_t>(sz), 0);
    std::vector<int> stack = {0};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        const TreeNode& nd = tree.node(id);
        if (nd.leaf() || !split_here[static_cast<std::size_t>(id)]) continue;
        kept[static_cast<std::size_t>(id)] = 1;
        stack.push_back(nd.left);
        stack.push_back(nd.right);
    }
    const double total = root_coarse_cost(tc.data_total, tree.n_leaves(), model) + opt[0];
    return detail::make_result(model, pen, tree, tc, kept, total);
}

namespace detail {

// Per-model prefix-sum bundle for the interval dynamic programs.
struct PrefixSums {
    std::vector<double> sum;      // sum[i] = x_0 + ... + x_{i-1}
    std::vector<double> sum_sq;   // Gaussian only
    std::vector<double> sum_lg;   // lgamma(x+1) cumulative, count models

    double S(int a, int b) const { return sum[static_cast<std::size_t>(b)] - sum[static_cast<std::size_t>(a)]; }
    double S2(int a, int b) const {
        return sum_sq[static_cast<std::size_t>(b)] - sum_sq[static_cast<std::size_t>(a)];
    }
    double LG(int a, int b) const {
        return sum_lg[static_cast<std::size_t>(b)] - sum_lg[static_cast<std::size_t>(a)];
    }

    static PrefixSums build(std::span<const double> x, ModelKind kind) {
        PrefixSums p;
        const std::size_t n = x.size();
        p.sum.assign(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) p.sum[i + 1] = p.sum[i] + x[i];
        if (kind == ModelKind::gaussian) {
            p.sum_sq.assign(n + 1, 0.0);
            for (std::size_t i = 0; i < n; ++i) p.sum_sq[i + 1] = p.sum_sq[i] + x[i] * x[i];
        } else {
            p.sum_lg.assign(n + 1, 0.0);
            for (std::size_t i = 0; i < n; ++i) p.sum_lg[i + 1] = p.sum_lg[i] + std::lgamma(x[i] + 1.0);
        }
        return p;
    }
};

// -log of the conditional factor at the fitted omega for split s of [a,b).
inline double keep_data_cost_at(ModelKind kind, double var, const PrefixSums& p, int a, int b, int s) {
    if (kind == ModelKind::gaussian) {
        const double c = split_var_factor({a, b}, s) * var;
        return 0.5 * std::log(2.0 * std::numbers::pi * c);
    }
    const double xi = p.S(a, b);
    if (xi == 0.0) return 0.0;
    return -log_binomial_pmf(p.S(a, s), xi, p.S(a, s) / xi);
}

inline double kill_cost_at(ModelKind kind, double var, const PrefixSums& p, int a, int b, int s) {
    return node_costs_from_sums(kind, var, {a, b}, s, p.S(a, b), p.S(a, s), 0.0).kill_cost;
}

// Negative profile log-likelihood of a single constant fit on [a, b);
// for the multinomial the global log n! term is accounted separately.
inline double segment_cost(ModelKind kind, double var, double n_total, const PrefixSums& p, int a,
                           int b) {
    const double m = b - a;
    const double s = p.S(a, b);
    switch (kind) {
        case ModelKind::gaussian:
            return 0.5 * m * std::log(2.0 * std::numbers::pi * var) + (p.S2(a, b) - s * s / m) / (2.0 * var);
        case ModelKind::poisson:
            return (s == 0.0 ? 0.0 : s - s * std::log(s / m)) + p.LG(a, b);
        case ModelKind::multinomial:
            return (s == 0.0 ? 0.0 : -s * std::log(s / (n_total * m))) + p.LG(a, b);
    }
    return 0.0;
}

// Flattened (a, b) table over 0 <= a < b <= n.
class IntervalTable {
  public:
    IntervalTable(int n, double fill) : n_(n), data_(static_cast<std::size_t>(n + 1) * (n + 1), fill) {}
    double& at(int a, int b) { return data_[static_cast<std::size_t>(a) * (n_ + 1) + b]; }
    double at(int a, int b) const { return data_[static_cast<std::size_t>(a) * (n_ + 1) + b]; }

  private:
    int n_;
    std::vector<double> data_;
};

}  // namespace detail

// General recursive partitioning via the interval dynamic program:
// sweep all O(N^2) subintervals by increasing length, choosing at each
// between no further split (all-trivial subtree) and the best of its
// N_I - 1 splits, each priced at the conditional MLE plus 2 * lambda.
// O(N^3) splits examined in total. Ties prefer no split, then the
// smallest split index. Returns the optimal partition together with an
// accompanying complete recursive partition (left-comb below unsplit
// cells).
inline EstimateResult estimate_rp(const ObservationVector& x, const ModelSpec& model,
                                  const PenaltyConfig& pen) {
    validate(x, model);
    const int n = x.size();
    if (pen.n_leaves != n) throw invalid_argument("penalty config sized for a different grid");
    const ModelKind kind = model.kind();
    const double var = kind == ModelKind::gaussian ? model.variance() : 0.0;
    const double n_total = kind == ModelKind::multinomial ? static_cast<double>(model.n_total()) : 0.0;
    (void)n_total;
    const detail::PrefixSums p = detail::PrefixSums::build(x.values, kind);

    // All-trivial subtree costs by the left-comb cascade recurrence.
    detail::IntervalTable all_trivial(n, 0.0);
    for (int b = 1; b <= n; ++b) {
        for (int a = b - 2; a >= 0; --a) {
            all_trivial.at(a, b) = detail::kill_cost_at(kind, var, p, a, b, a + 1) + all_trivial.at(a + 1, b);
        }
    }

    detail::IntervalTable opt(n, 0.0);
    std::vector<int> choice(static_cast<std::size_t>(n + 1) * (n + 1), -1);
    const double two_lambda = 2.0 * pen.lambda;
    for (int len = 2; len <= n; ++len) {
        for (int a = 0; a + len <= n; ++a) {
            const int b = a + len;
            double best = all_trivial.at(a, b);
            int best_split = -1;
            for (int s = a + 1; s < b; ++s) {
                const double cand = detail::keep_data_cost_at(kind, var, p, a, b, s) + two_lambda +
                                    opt.at(a, s) + opt.at(s, b);
                if (cand < best) {
                    best = cand;
                    best_split = s;
                }
            }
            opt.at(a, b) = best;
            choice[static_cast<std::size_t>(a) * (n + 1) + b] = best_split;
        }
    }

    // Materialize the accompanying complete recursive partition and the
    // kept flags along the selected structure.
    detail::TreeBuilder builder;
    std::vector<int> kept_ids;
    const auto build = [&](auto&& self, int a, int b, bool forced_trivial) -> int {
        const int id = builder.add_leaf({a, b});
        if (b - a == 1) return id;
        const int s = forced_trivial ? -1 : choice[static_cast<std::size_t>(a) * (n + 1) + b];
        if (s >= 0) {
            const int l = self(self, a, s, false);
            const int r = self(self, s, b, false);
            builder.split_leaf(id, s, l, r);
            kept_ids.push_back(id);
        } else {
            const int l = self(self, a, a + 1, true);
            const int r = self(self, a + 1, b, true);
            builder.split_leaf(id, a + 1, l, r);
        }
        return id;
    };
    build(build, 0, n, false);
    const PartitionTree tree = builder.finish();

    const detail::TreeCosts tc = detail::compute_tree_costs(x.values, tree, model, pen.lambda);
    std::vector<char> kept(static_cast<std::size_t>(tree.size()), 0);
    for (int id : kept_ids) kept[static_cast<std::size_t>(id)] = 1;
    const double total = root_coarse_cost(tc.data_total, n, model) + opt.at(0, n);
    return detail::make_result(model, pen, tree, tc, kept, total);
}

// Independent oracle for the recursive partitioning optimum: a classic
// change-point dynamic program over segment boundaries. The recursive
// partitioning objective depends only on the final cell partition (d - 1
// kept splits for d cells, and a partition-order-free profile
// likelihood), so its optimum must match this one exactly.
inline EstimateResult segmentation_dp(const ObservationVector& x, const ModelSpec& model,
                                      const PenaltyConfig& pen) {
    validate(x, model);
    const int n = x.size();
    if (pen.n_leaves != n) throw invalid_argument("penalty config sized for a different grid");
    const ModelKind kind = model.kind();
    const double var = kind == ModelKind::gaussian ? model.variance() : 0.0;
    const double n_total = kind == ModelKind::multinomial ? static_cast<double>(model.n_total()) : 0.0;
    const detail::PrefixSums p = detail::PrefixSums::build(x.values, kind);
    const double two_lambda = 2.0 * pen.lambda;

    std::vector<double> best(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<int> prev(static_cast<std::size_t>(n + 1), 0);
    for (int j = 1; j <= n; ++j) {
        double b = std::numeric_limits<double>::infinity();
        int bi = 0;
        for (int i = 0; i < j; ++i) {
            const double cand = best[static_cast<std::size_t>(i)] +
                                detail::segment_cost(kind, var, n_total, p, i, j) +
                                (i > 0 ? two_lambda : 0.0);
            if (cand < b) {
                b = cand;
                bi = i;
            }
        }
        best[static_cast<std::size_t>(j)] = b;
        prev[static_cast<std::size_t>(j)] = bi;
    }

    std::vector<int> bounds;  // interior cut points, descending
    for (int j = n; j > 0; j = prev[static_cast<std::size_t>(j)]) {
        if (prev[static_cast<std::size_t>(j)] > 0) bounds.push_back(prev[static_cast<std::size_t>(j)]);
    }
    std::sort(bounds.begin(), bounds.end());

    // Accompanying tree: split at each boundary left to right, left-comb
    // inside the cells.
    detail::TreeBuilder builder;
    std::vector<int> kept_ids;
    const auto build = [&](auto&& self, int a, int b, std::size_t next_bound) -> int {
        const int id = builder.add_leaf({a, b});
        if (b - a == 1) return id;
        int s;
        bool is_boundary = false;
        if (next_bound < bounds.size() && bounds[next_bound] > a && bounds[next_bound] < b) {
            s = bounds[next_bound];
            is_boundary = true;
        } else {
            s = a + 1;
        }
        const int l = self(self, a, s, bounds.size());
        const int r = self(self, s, b, is_boundary ? next_bound + 1 : bounds.size());
        builder.split_leaf(id, s, l, r);
        if (is_boundary) kept_ids.push_back(id);
        return id;
    };
    build(build, 0, n, 0);
    const PartitionTree tree = builder.finish();

    const detail::TreeCosts tc = detail::compute_tree_costs(x.values, tree, model, pen.lambda);
    std::vector<char> kept(static_cast<std::size_t>(tree.size()), 0);
    for (int id : kept_ids) kept[static_cast<std::size_t>(id)] = 1;
    double total = best[static_cast<std::size_t>(n)];
    if (kind == ModelKind::multinomial) total -= std::lgamma(n_total + 1.0);
    return detail::make_result(model, pen, tree, tc, kept, total);
}

enum class OracleFamily { threshold, rdp, rp };

// Exhaustive minimizer over a whole estimator family, for equivalence
// tests. Candidate objectives are evaluated through the direct
// likelihood of the reconstructed fit, independent of the node-cost
// route the fast algorithms take.
inline EstimateResult brute_force_oracle(const ObservationVector& x, const ModelSpec& model,
                                         const PenaltyConfig& pen, OracleFamily family) {
    validate(x, model);
    const int n = x.size();
    if (pen.n_leaves != n) throw invalid_argument("penalty config sized for a different grid");
    const double two_lambda = 2.0 * pen.lambda;

    if (family == OracleFamily::rp) {
        if (n > 8) throw resource_limit("brute_force_oracle(rp) capped at n = 8");
        // Every contiguous segmentation, encoded by cut masks.
        const detail::PrefixSums p = detail::PrefixSums::build(x.values, model.kind());
        const double var = model.kind() == ModelKind::gaussian ? model.variance() : 0.0;
        const double n_total =
            model.kind() == ModelKind::multinomial ? static_cast<double>(model.n_total()) : 0.0;
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_mask = 0;
        for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
            double obj = 0.0;
            int segs = 0;
            int a = 0;
            for (int j = 1; j <= n; ++j) {
                if (j == n || (mask >> (j - 1)) & 1u) {
                    obj += detail::segment_cost(model.kind(), var, n_total, p, a, j);
                    ++segs;
                    a = j;
                }
            }
            obj += two_lambda * (segs - 1);
            if (model.kind() == ModelKind::multinomial) obj -= std::lgamma(n_total + 1.0);
            if (obj < best) {
                best = obj;
                best_mask = mask;
            }
        }
        // Reuse the segmentation result assembly by rebuilding from cuts.
        std::vector<int> bounds;
        for (int j = 1; j < n; ++j) {
            if ((best_mask >> (j - 1)) & 1u) bounds.push_back(j);
        }
        detail::TreeBuilder builder;
        std::vector<int> kept_ids;
        const auto build = [&](auto&& self, int a, int b, std::size_t next_bound) -> int {
            const int id = builder.add_leaf({a, b});
            if (b - a == 1) return id;
            int s;
            bool is_boundary = false;
            if (next_bound < bounds.size() && bounds[next_bound] > a && bounds[next_bound] < b) {
                s = bounds[next_bound];
                is_boundary = true;
            } else {
                s = a + 1;
            }
            const int l = self(self, a, s, bounds.size());
            const int r = self(self, s, b, is_boundary ? next_bound + 1 : bounds.size());
            builder.split_leaf(id, s, l, r);
            if (is_boundary) kept_ids.push_back(id);
            return id;
        };
        build(build, 0, n, 0);
        const PartitionTree tree = builder.finish();
        const detail::TreeCosts tc = detail::compute_tree_costs(x.values, tree, model, pen.lambda);
        std::vector<char> kept(static_cast<std::size_t>(tree.size()), 0);
        for (int id : kept_ids) kept[static_cast<std::size_t>(id)] = 1;
        return detail::make_result(model, pen, tree, tc, kept, best);
    }

    // Tree-structured families over the dyadic partition.
    if ((n & (n - 1)) != 0) throw invalid_argument("threshold/rdp oracles need a power-of-two grid");
    if (family == OracleFamily::threshold && n > 8) {
        throw resource_limit("brute_force_oracle(threshold) capped at n = 8");
    }
    if (family == OracleFamily::rdp && n > 16) {
        throw resource_limit("brute_force_oracle(rdp) capped at n = 16");
    }
    const PartitionTree tree = dyadic_crp(n);
    const detail::TreeCosts tc = detail::compute_tree_costs(x.values, tree, model, pen.lambda);
    const std::vector<int> internal = tree.internal_ids();
    const double root_mle = model.kind() == ModelKind::multinomial ? 1.0 : tc.data_total;

    const auto pattern_objective = [&](const std::vector<char>& kept_by_id, int kept_count) {
        std::vector<double> omega_by_id(static_cast<std::size_t>(tree.size()), 0.0);
        for (int id : internal) {
            const NodeCosts& c =
                tc.costs[static_cast<std::size_t>(tc.index_by_id[static_cast<std::size_t>(id)])];
            omega_by_id[static_cast<std::size_t>(id)] =
                kept_by_id[static_cast<std::size_t>(id)] ? c.omega_hat
                                                         : trivial_omega(model.kind(), c.parent, c.split);
        }
        ParamVector fit;
        fit.model = model.kind();
        fit.values = detail::reconstruct_by_node(tree, model.kind(), root_mle, omega_by_id);
        return -loglik_direct(x, fit, model) + two_lambda * kept_count;
    };

    std::vector<std::vector<char>> candidates;
    if (family == OracleFamily::threshold) {
        const int bits = static_cast<int>(internal.size());
        for (std::uint32_t mask = 0; mask < (1u << bits); ++mask) {
            std::vector<char> kept(static_cast<std::size_t>(tree.size()), 0);
            for (int b = 0; b < bits; ++b) {
                if ((mask >> b) & 1u) kept[static_cast<std::size_t>(internal[static_cast<std::size_t>(b)])] = 1;
            }
            candidates.push_back(std::move(kept));
        }
    } else {
        // All prunings: kept sets that are upward-closed in the tree.
        const auto prunings = [&](auto&& self, int id) -> std::vector<std::vector<int>> {
            const TreeNode& nd = tree.node(id);
            std::vector<std::vector<int>> out = {{}};
            if (nd.leaf()) return out;
            const auto lefts = self(self, nd.left);
            const auto rights = self(self, nd.right);
            for (const auto& l : lefts) {
                for (const auto& r : rights) {
                    std::vector<int> ids = {id};
                    ids.insert(ids.end(), l.begin(), l.end());
                    ids.insert(ids.end(), r.begin(), r.end());
                    out.push_back(std::move(ids));
                }
            }
            return out;
        };
        for (const auto& ids : prunings(prunings, 0)) {
            std::vector<char> kept(static_cast<std::size_t>(tree.size()), 0);
            for (int id : ids) kept[static_cast<std::size_t>(id)] = 1;
            candidates.push_back(std::move(kept));
        }
    }

    double best = std::numeric_limits<double>::infinity();
    const std::vector<char>* best_kept = nullptr;
    for (const auto& kept : candidates) {
        int count = 0;
        for (int id : internal) count += kept[static_cast<std::size_t>(id)];
        const double obj = pattern_objective(kept, count);
        if (obj < best) {
            best = obj;
            best_kept = &kept;
        }
    }
    return detail::make_result(model, pen, tree, tc, *best_kept, best);
}

// Equispaced value grid D_N[R1, R2]; the canonical construction uses
// ceil(sqrt(n)) levels.
struct QuantizationGrid {
    double lo = 0.0;
    double hi = 1.0;
    int levels = 2;

    static QuantizationGrid for_size(double lo, double hi, int n_leaves) {
        if (n_leaves < 2) throw invalid_argument("quantization grid needs n_leaves >= 2");
        QuantizationGrid g;
        g.lo = lo;
        g.hi = hi;
        g.levels = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_leaves))));
        g.check();
        return g;
    }

    void check() const {
        if (levels < 1) throw invalid_argument("quantization grid needs at least one level");
        if (levels >= 2 && !(lo < hi)) throw invalid_argument("quantization grid needs R1 < R2");
    }

    double value(int k) const {
        if (levels == 1) return lo;
        return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(levels - 1);
    }
};

// Number of maximal constant runs of a vector (the piece count of the
// corresponding step function).
inline int run_count(std::span<const double> v) {
    if (v.empty()) return 0;
    int runs = 1;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] != v[i - 1]) ++runs;
    }
    return runs;
}

// The discretized penalized maximum-likelihood estimator: exhaustive
// minimization of -log p(x | theta') + 2 * lambda * run_count(theta')
// over all grid-valued vectors. Validation tool for the oracle
// inequality at tiny sizes; the production estimators stay unquantized.
inline EstimateResult quantized_penalized_mle(const ObservationVector& x, const ModelSpec& model,
                                              const PenaltyConfig& pen,
                                              const QuantizationGrid& grid) {
    validate(x, model);
    grid.check();
    const int n = x.size();
    if (pen.n_leaves != n) throw invalid_argument("penalty config sized for a different grid");
    if (n > 6) throw resource_limit("quantized_penalized_mle capped at n = 6");
    if (model.kind() != ModelKind::gaussian && grid.lo < 0.0) {
        throw invalid_params("quantization grid must be nonnegative for count models");
    }
    double total_vectors = std::pow(static_cast<double>(grid.levels), n);
    if (total_vectors > 2e7) throw resource_limit("quantized search space exceeds 2e7 vectors");

    ParamVector candidate;
    candidate.model = model.kind();
    candidate.values.assign(static_cast<std::size_t>(n), grid.value(0));
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_values;
    bool any = false;
    while (true) {
        for (int i = 0; i < n; ++i) candidate.values[static_cast<std::size_t>(i)] = grid.value(idx[static_cast<std::size_t>(i)]);
        bool feasible = true;
        if (model.kind() == ModelKind::multinomial) {
            double sum = 0.0;
            for (double v : candidate.values) sum += v;
            feasible = std::abs(sum - 1.0) <= 1e-9;
        }
        if (feasible) {
            any = true;
            const double obj = -loglik_direct(x, candidate, model) +
                               2.0 * pen.lambda * run_count(candidate.values);
            if (obj < best) {
                best = obj;
                best_values = candidate.values;
            }
        }
        // Odometer increment.
        int pos = n - 1;
        while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == grid.levels) {
            idx[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    if (!any) throw invalid_config("quantization grid contains no feasible parameter vector");

    ParamVector theta_hat;
    theta_hat.model = model.kind();
    theta_hat.values = best_values;
    const PartitionTree tree = (n & (n - 1)) == 0 ? dyadic_crp(n) : left_comb_crp(n);
    std::vector<PartitionCell> cells;
    int a = 0;
    for (int i = 1; i <= n; ++i) {
        if (i == n || best_values[static_cast<std::size_t>(i)] != best_values[static_cast<std::size_t>(i - 1)]) {
            cells.push_back({{a, i}, best_values[static_cast<std::size_t>(a)]});
            a = i;
        }
    }
    const detail::TreeCosts tc = detail::compute_tree_costs(x.values, tree, model, pen.lambda);
    EstimateResult res{model.kind(), pen.gamma, std::move(theta_hat), tree,
                       {},           std::move(cells), best,          tc.costs};
    return res;
}

}  // namespace mslik
