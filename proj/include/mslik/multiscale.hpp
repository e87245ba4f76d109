#pragma once

#include <cmath>
#include <span>
#include <unordered_map>
#include <vector>

#include "mslik/errors.hpp"
#include "mslik/models.hpp"
#include "mslik/partition.hpp"

namespace mslik {

// One multiscale coordinate: the omega attached to a split of a complete
// recursive partition.
struct OmegaEntry {
    Interval parent;
    int split = 0;
    double omega = 0.0;
};

// The reparameterization of theta induced by a complete recursive
// partition: the root aggregate plus one omega per nonterminal interval.
// For the Gaussian model omega is the scaled Haar contrast
// c_I (t_r/N_r - t_l/N_l); for Poisson/multinomial it is the left-child
// share t_l / t_I in [0, 1]. The root is sum(theta), or the constant 1
// for the multinomial.
struct MultiscaleParams {
    double root = 0.0;
    std::vector<OmegaEntry> entries;  // tree preorder
};

// The omega value that signals local homogeneity of theta: 0 for the
// Gaussian contrast, rho_I = N_l/N_I for the count-model ratios.
inline double trivial_omega(ModelKind model, const Interval& parent, int split) {
    return model == ModelKind::gaussian ? 0.0 : split_rho(parent, split);
}

namespace detail {

inline std::uint64_t interval_key(const Interval& iv) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(iv.start)) << 32) |
           static_cast<std::uint32_t>(iv.end);
}

// omega at one node given the aggregate of the parent and left child.
inline double omega_from_sums(ModelKind model, const Interval& parent, int split, double sum_parent,
                              double sum_left) {
    if (model == ModelKind::gaussian) {
        const double nl = split - parent.start;
        const double nr = parent.end - split;
        const double c = split_var_factor(parent, split);
        return c * ((sum_parent - sum_left) / nr - sum_left / nl);
    }
    if (sum_parent == 0.0) return split_rho(parent, split);
    return sum_left / sum_parent;
}

// Inverse map: the left-child aggregate implied by (sum_parent, omega).
inline double left_sum_from_omega(ModelKind model, const Interval& parent, int split,
                                  double sum_parent, double omega) {
    if (model == ModelKind::gaussian) {
        return split_rho(parent, split) * sum_parent - omega;
    }
    return omega * sum_parent;
}

// Top-down reconstruction over node ids; omega_by_id must cover every
// internal node of the tree. Fills per-cell theta values.
inline std::vector<double> reconstruct_by_node(const PartitionTree& tree, ModelKind model,
                                               double root,
                                               std::span<const double> omega_by_id) {
    std::vector<double> sums(static_cast<std::size_t>(tree.size()), 0.0);
    std::vector<double> theta(static_cast<std::size_t>(tree.n_leaves()), 0.0);
    sums[0] = root;
    for (int id = 0; id < tree.size(); ++id) {
        const TreeNode& nd = tree.node(id);
        const double s = sums[static_cast<std::size_t>(id)];
        if (nd.leaf()) {
            const double per_cell = s / nd.cell.length();
            for (int i = nd.cell.start; i < nd.cell.end; ++i) theta[static_cast<std::size_t>(i)] = per_cell;
            continue;
        }
        const double sl =
            left_sum_from_omega(model, nd.cell, nd.split, s, omega_by_id[static_cast<std::size_t>(id)]);
        sums[static_cast<std::size_t>(nd.left)] = sl;
        sums[static_cast<std::size_t>(nd.right)] = s - sl;
    }
    return theta;
}

}  // namespace detail

// Map theta to its multiscale coordinates along `tree`. For count models
// a zero-mass interval takes the trivial omega by convention.
inline MultiscaleParams decompose(const ParamVector& theta, const PartitionTree& tree,
                                  const ModelSpec& model) {
    if (theta.size() != tree.n_leaves()) throw invalid_argument("theta length does not match tree");
    if (!tree.complete()) throw invalid_argument("decompose requires a complete recursive partition");
    if (theta.model != model.kind()) throw invalid_argument("theta model tag mismatch");
    const SumPyramid sums = sum_pyramid(theta.values, tree);
    MultiscaleParams ms;
    ms.root = model.kind() == ModelKind::multinomial ? 1.0 : sums.root_sum();
    ms.entries.reserve(static_cast<std::size_t>(tree.size() / 2));
    for (int id = 0; id < tree.size(); ++id) {
        const TreeNode& nd = tree.node(id);
        if (nd.leaf()) continue;
        const double w = detail::omega_from_sums(model.kind(), nd.cell, nd.split, sums.value(id),
                                                 sums.value(nd.left));
        ms.entries.push_back({nd.cell, nd.split, w});
    }
    return ms;
}

// Exact inverse of decompose: rebuild per-cell theta from the root
// aggregate and the omega map.
inline ParamVector reconstruct(const MultiscaleParams& ms, const PartitionTree& tree,
                               const ModelSpec& model) {
    if (!tree.complete()) throw invalid_argument("reconstruct requires a complete recursive partition");
    std::unordered_map<std::uint64_t, double> omega;
    omega.reserve(ms.entries.size());
    for (const auto& e : ms.entries) omega[detail::interval_key(e.parent)] = e.omega;
    std::vector<double> by_id(static_cast<std::size_t>(tree.size()), 0.0);
    for (int id = 0; id < tree.size(); ++id) {
        const TreeNode& nd = tree.node(id);
        if (nd.leaf()) continue;
        const auto it = omega.find(detail::interval_key(nd.cell));
        if (it == omega.end()) {
            throw invalid_argument("missing omega entry for " + to_string(nd.cell));
        }
        by_id[static_cast<std::size_t>(id)] = it->second;
    }
    ParamVector theta;
    theta.model = model.kind();
    theta.values = detail::reconstruct_by_node(tree, model.kind(), ms.root, by_id);
    return theta;
}

// Log-likelihood through the multiscale factorization: the coarse root
// term plus one conditional per split. Gaussian children are
// Gaussian(rho X_I - omega, c sigma^2); count-model children are
// Binomial(X_I, omega). The multinomial root is a point mass at n_total.
// Agrees with loglik_direct up to rounding, for any complete tree.
inline double loglik_factorized(const ObservationVector& x, const MultiscaleParams& ms,
                                const PartitionTree& tree, const ModelSpec& model) {
    if (x.size() != tree.n_leaves()) throw invalid_argument("x length does not match tree");
    if (!tree.complete()) throw invalid_argument("loglik_factorized requires a complete tree");
    if (ms.entries.size() != static_cast<std::size_t>(tree.size() / 2)) {
        throw invalid_argument("omega map does not cover the tree's nonterminal intervals");
    }
    std::unordered_map<std::uint64_t, double> omega;
    omega.reserve(ms.entries.size());
    for (const auto& e : ms.entries) omega[detail::interval_key(e.parent)] = e.omega;

    const SumPyramid sums = sum_pyramid(x.values, tree);
    double ll = 0.0;
    switch (model.kind()) {
        case ModelKind::gaussian:
            ll = log_normal_pdf(sums.root_sum(), ms.root, tree.n_leaves() * model.variance());
            break;
        case ModelKind::poisson:
            ll = log_poisson_pmf(sums.root_sum(), ms.root);
            break;
        case ModelKind::multinomial:
            ll = sums.root_sum() == static_cast<double>(model.n_total()) ? 0.0 : kNegInf;
            break;
    }
    for (int id = 0; id < tree.size(); ++id) {
        const TreeNode& nd = tree.node(id);
        if (nd.leaf()) continue;
        const auto it = omega.find(detail::interval_key(nd.cell));
        if (it == omega.end()) throw invalid_argument("missing omega entry for " + to_string(nd.cell));
        const double w = it->second;
        const double xi = sums.value(id);
        const double xl = sums.value(nd.left);
        if (model.kind() == ModelKind::gaussian) {
            const double mean = split_rho(nd.cell, nd.split) * xi - w;
            ll += log_normal_pdf(xl, mean, split_var_factor(nd.cell, nd.split) * model.variance());
        } else {
            ll += log_binomial_pmf(xl, xi, w);
        }
    }
    return ll;
}

// Local generalized-likelihood-ratio ingredients at one split: the
// negative conditional log-likelihood under the trivial omega (kill) and
// under the conditional MLE omega_hat (keep), both in nats, penalty
// excluded. keep_total_cost folds in the 2*lambda price of keeping.
struct NodeCosts {
    Interval parent;
    int split = -1;
    double kill_cost = 0.0;
    double keep_data_cost = 0.0;
    double omega_hat = 0.0;
    double keep_total_cost = 0.0;

    double gain() const { return kill_cost - keep_data_cost; }
};

namespace detail {

// Cost core over raw aggregates; shared by the tree-based and the
// interval-DP call sites.
inline NodeCosts node_costs_from_sums(ModelKind kind, double var, const Interval& parent, int split,
                                      double sum_parent, double sum_left, double lambda) {
    NodeCosts c;
    c.parent = parent;
    c.split = split;
    if (kind == ModelKind::gaussian) {
        const double cvar = split_var_factor(parent, split) * var;
        const double base = 0.5 * std::log(2.0 * std::numbers::pi * cvar);
        const double rho_mean = split_rho(parent, split) * sum_parent;
        c.omega_hat = rho_mean - sum_left;
        c.kill_cost = base + (sum_left - rho_mean) * (sum_left - rho_mean) / (2.0 * cvar);
        c.keep_data_cost = base;
    } else {
        const double rho = split_rho(parent, split);
        if (sum_parent == 0.0) {
            c.omega_hat = rho;
            c.kill_cost = 0.0;
            c.keep_data_cost = 0.0;
        } else {
            c.omega_hat = sum_left / sum_parent;
            c.kill_cost = -log_binomial_pmf(sum_left, sum_parent, rho);
            c.keep_data_cost = -log_binomial_pmf(sum_left, sum_parent, c.omega_hat);
        }
    }
    c.keep_total_cost = c.keep_data_cost + 2.0 * lambda;
    return c;
}

}  // namespace detail

inline NodeCosts node_costs(const SumPyramid& pyramid, const Interval& parent, int split,
                            const ModelSpec& model, double lambda) {
    const int pid = pyramid.tree().find(parent);
    if (pid < 0 || pyramid.tree().node(pid).leaf() || pyramid.tree().node(pid).split != split) {
        throw invalid_argument("pyramid does not cover the split " + to_string(parent) + "@" +
                               std::to_string(split));
    }
    const double var = model.kind() == ModelKind::gaussian ? model.variance() : 0.0;
    return detail::node_costs_from_sums(model.kind(), var, parent, split, pyramid.value(pid),
                                        pyramid.value(pyramid.tree().node(pid).left), lambda);
}

// -log of the coarse root factor at its maximum-likelihood parameter:
// the fixed head of every estimator's objective.
inline double root_coarse_cost(double root_sum, int n_leaves, const ModelSpec& model) {
    switch (model.kind()) {
        case ModelKind::gaussian:
            return 0.5 * std::log(2.0 * std::numbers::pi * n_leaves * model.variance());
        case ModelKind::poisson:
            return -log_poisson_pmf(root_sum, root_sum);
        case ModelKind::multinomial:
            return 0.0;
    }
    return 0.0;
}

// Total kill cost of a fully trivial subtree over `interval`: the sum of
// trivial-split conditional costs over any complete recursive partition
// of the interval. The value is tree-invariant (a consequence of the
// factorization identity), so it is computed by a fixed left-comb
// cascade.
inline double cascade_kill_cost(const ObservationVector& x, const Interval& interval,
                                const ModelSpec& model) {
    if (interval.start < 0 || interval.end > x.size() || interval.length() < 1) {
        throw invalid_argument("interval outside the grid");
    }
    const double var = model.kind() == ModelKind::gaussian ? model.variance() : 0.0;
    double total = 0.0;
    double suffix_sum = 0.0;
    for (int i = interval.start; i < interval.end; ++i) suffix_sum += x.values[static_cast<std::size_t>(i)];
    for (int a = interval.start; a + 1 < interval.end; ++a) {
        const Interval iv{a, interval.end};
        const NodeCosts c = detail::node_costs_from_sums(
            model.kind(), var, iv, a + 1, suffix_sum, x.values[static_cast<std::size_t>(a)], 0.0);
        total += c.kill_cost;
        suffix_sum -= x.values[static_cast<std::size_t>(a)];
    }
    return total;
}

}  // namespace mslik
