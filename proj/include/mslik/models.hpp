#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mslik/errors.hpp"
#include "mslik/partition.hpp"
#include "mslik/rng.hpp"
#include "mslik/signal.hpp"

namespace mslik {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

enum class ModelKind { gaussian, poisson, multinomial };

inline std::string_view model_name(ModelKind k) {
    switch (k) {
        case ModelKind::gaussian: return "gaussian";
        case ModelKind::poisson: return "poisson";
        case ModelKind::multinomial: return "multinomial";
    }
    return "?";
}

// Observation model: Gaussian with fixed known sigma, Poisson counts, or
// a single multinomial draw of fixed total.
class ModelSpec {
  public:
    static ModelSpec gaussian(double sigma) {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw invalid_argument("gaussian sigma must be finite and > 0");
        }
        return ModelSpec(ModelKind::gaussian, sigma, 0);
    }

    static ModelSpec poisson() { return ModelSpec(ModelKind::poisson, 0.0, 0); }

    static ModelSpec multinomial(std::int64_t n_total) {
        if (n_total < 1) throw invalid_argument("multinomial n_total must be >= 1");
        return ModelSpec(ModelKind::multinomial, 0.0, n_total);
    }

    ModelKind kind() const { return kind_; }

    double sigma() const {
        if (kind_ != ModelKind::gaussian) throw invalid_argument("sigma is a gaussian-only field");
        return sigma_;
    }

    double variance() const { return sigma() * sigma(); }

    std::int64_t n_total() const {
        if (kind_ != ModelKind::multinomial) throw invalid_argument("n_total is a multinomial-only field");
        return n_total_;
    }

  private:
    ModelSpec(ModelKind kind, double sigma, std::int64_t n_total)
        : kind_(kind), sigma_(sigma), n_total_(n_total) {}

    ModelKind kind_;
    double sigma_;
    std::int64_t n_total_;
};

// Per-cell parameter vector theta. For the multinomial model the entries
// are cell probabilities summing to one; `range` optionally carries the
// theory bounds [c, C] for checks that need them.
struct ParamVector {
    ModelKind model = ModelKind::gaussian;
    std::vector<double> values;
    std::optional<std::pair<double, double>> range;

    int size() const { return static_cast<int>(values.size()); }
};

struct ObservationVector {
    ModelKind model = ModelKind::gaussian;
    std::vector<double> values;

    int size() const { return static_cast<int>(values.size()); }
};

namespace detail {
inline bool is_count(double v) { return v >= 0.0 && v == std::floor(v) && std::isfinite(v); }
}

inline void validate(const ParamVector& theta, const ModelSpec& model) {
    if (theta.model != model.kind()) throw invalid_argument("parameter vector model tag mismatch");
    if (theta.values.empty()) throw invalid_argument("empty parameter vector");
    double sum = 0.0;
    for (double v : theta.values) {
        if (!std::isfinite(v)) throw invalid_params("parameter entries must be finite");
        if (model.kind() != ModelKind::gaussian && v < 0.0) {
            throw invalid_params("parameter entries must be >= 0 for count models");
        }
        sum += v;
    }
    if (model.kind() == ModelKind::multinomial && std::abs(sum - 1.0) > 1e-9) {
        throw invalid_params("multinomial parameters must sum to 1, got " + std::to_string(sum));
    }
}

inline void validate(const ObservationVector& x, const ModelSpec& model) {
    if (x.model != model.kind()) throw invalid_argument("observation vector model tag mismatch");
    if (x.values.empty()) throw invalid_argument("empty observation vector");
    double sum = 0.0;
    for (double v : x.values) {
        if (model.kind() == ModelKind::gaussian) {
            if (!std::isfinite(v)) throw invalid_params("gaussian observations must be finite");
        } else if (!detail::is_count(v)) {
            throw invalid_params("count observations must be nonnegative integers");
        }
        sum += v;
    }
    if (model.kind() == ModelKind::multinomial &&
        sum != static_cast<double>(model.n_total())) {
        throw invalid_params("multinomial observations must sum to n_total");
    }
}

// --- elementary log densities, all in nats ---

inline double log_normal_pdf(double x, double mean, double var) {
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - (x - mean) * (x - mean) / (2.0 * var);
}

inline double log_poisson_pmf(double k, double mean) {
    if (mean == 0.0) return k == 0.0 ? 0.0 : kNegInf;
    return -mean + k * std::log(mean) - std::lgamma(k + 1.0);
}

inline double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Binomial(k; n, p) in nats, with the 0^0 = 1 conventions so empty or
// degenerate splits cost nothing. p outside [0,1] is a caller error.
inline double log_binomial_pmf(double k, double n, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw invalid_params("binomial probability outside [0,1]");
    if (k < 0.0 || k > n) return kNegInf;
    if (n == 0.0) return 0.0;
    if (p == 0.0) return k == 0.0 ? 0.0 : kNegInf;
    if (p == 1.0) return k == n ? 0.0 : kNegInf;
    double out = log_choose(n, k);
    if (k > 0.0) out += k * std::log(p);
    if (k < n) out += (n - k) * std::log1p(-p);
    return out;
}

// --- sampling ---

// Sample theta from a continuous signal: Gaussian/Poisson use the cell
// average N * integral; the multinomial uses plain cell integrals,
// normalized by the signal's total mass so the result is a probability
// vector even for unnormalized specs.
inline ParamVector sample_theta_from_signal(const Signal& signal, int n_leaves,
                                            const ModelSpec& model) {
    if (n_leaves < 1) throw invalid_argument("sample_theta_from_signal requires n_leaves >= 1");
    ParamVector theta;
    theta.model = model.kind();
    theta.values.resize(static_cast<std::size_t>(n_leaves));
    const double n = static_cast<double>(n_leaves);
    double total = 1.0;
    if (model.kind() == ModelKind::multinomial) {
        total = signal.integral(0.0, 1.0);
        if (!(total > 0.0)) throw invalid_signal("multinomial signal must have positive total mass");
    }
    for (int i = 0; i < n_leaves; ++i) {
        const double cell = signal.integral(i / n, (i + 1) / n);
        double v;
        if (model.kind() == ModelKind::multinomial) {
            v = cell / total;
        } else {
            v = n * cell;
        }
        if (model.kind() != ModelKind::gaussian && v < -1e-15) {
            throw invalid_signal("signal must be nonnegative for count models");
        }
        theta.values[static_cast<std::size_t>(i)] = model.kind() == ModelKind::gaussian ? v : std::max(v, 0.0);
    }
    return theta;
}

inline ParamVector sample_theta_from_signal(const SignalSpec& spec, int n_leaves,
                                            const ModelSpec& model) {
    return sample_theta_from_signal(make_signal(spec), n_leaves, model);
}

// Deterministic draw given the seed. The multinomial draws by top-down
// conditional binomial splitting along a complete recursive partition
// (dyadic when the grid is a power of two, left-comb otherwise), which is
// distributionally identical to a direct multinomial draw.
inline ObservationVector draw_observations(const ParamVector& theta, const ModelSpec& model,
                                           std::uint64_t seed) {
    validate(theta, model);
    Rng rng(splitmix64(seed));
    ObservationVector x;
    x.model = model.kind();
    const std::size_t n = theta.values.size();
    x.values.resize(n, 0.0);
    switch (model.kind()) {
        case ModelKind::gaussian:
            for (std::size_t i = 0; i < n; ++i) {
                x.values[i] = rng.gaussian(theta.values[i], model.sigma());
            }
            break;
        case ModelKind::poisson:
            for (std::size_t i = 0; i < n; ++i) {
                x.values[i] = static_cast<double>(rng.poisson(theta.values[i]));
            }
            break;
        case ModelKind::multinomial: {
            const int nl = static_cast<int>(n);
            const PartitionTree tree =
                (nl & (nl - 1)) == 0 ? dyadic_crp(nl) : left_comb_crp(nl);
            const SumPyramid totals = sum_pyramid(theta.values, tree);
            std::vector<std::int64_t> counts(static_cast<std::size_t>(tree.size()), 0);
            counts[0] = model.n_total();
            for (int id = 0; id < tree.size(); ++id) {
                const TreeNode& nd = tree.node(id);
                if (nd.leaf()) {
                    x.values[static_cast<std::size_t>(nd.cell.start)] =
                        static_cast<double>(counts[static_cast<std::size_t>(id)]);
                    continue;
                }
                const double tot = totals.value(id);
                const double p = tot > 0.0 ? totals.value(nd.left) / tot : 0.0;
                const std::int64_t c = counts[static_cast<std::size_t>(id)];
                const std::int64_t cl = rng.binomial(c, std::clamp(p, 0.0, 1.0));
                counts[static_cast<std::size_t>(nd.left)] = cl;
                counts[static_cast<std::size_t>(nd.right)] = c - cl;
            }
            break;
        }
    }
    return x;
}

// --- likelihoods and losses ---

// Exact log density/mass of x at theta, including all normalizing terms
// (Poisson -log k!, the multinomial coefficient). Returns -inf when x is
// impossible under theta.
inline double loglik_direct(const ObservationVector& x, const ParamVector& theta,
                            const ModelSpec& model) {
    if (x.values.size() != theta.values.size()) throw invalid_argument("x/theta length mismatch");
    const std::size_t n = x.values.size();
    double ll = 0.0;
    switch (model.kind()) {
        case ModelKind::gaussian: {
            const double var = model.variance();
            for (std::size_t i = 0; i < n; ++i) ll += log_normal_pdf(x.values[i], theta.values[i], var);
            break;
        }
        case ModelKind::poisson:
            for (std::size_t i = 0; i < n; ++i) {
                ll += log_poisson_pmf(x.values[i], theta.values[i]);
            }
            break;
        case ModelKind::multinomial: {
            double total = 0.0;
            for (double v : x.values) total += v;
            if (total != static_cast<double>(model.n_total())) return kNegInf;
            ll = std::lgamma(total + 1.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double k = x.values[i];
                ll -= std::lgamma(k + 1.0);
                if (k > 0.0) {
                    if (theta.values[i] <= 0.0) return kNegInf;
                    ll += k * std::log(theta.values[i]);
                }
            }
            break;
        }
    }
    return ll;
}

// Squared Hellinger distance between the joint densities, via the
// closed-form affinities: H^2 = 2(1 - A) with
//   A = exp(-sum (t - t')^2 / (8 sigma^2))      (Gaussian)
//   A = exp(-1/2 sum (sqrt t - sqrt t')^2)      (Poisson)
//   A = (sum sqrt(t t'))^n                      (multinomial)
inline double hellinger_sq(const ParamVector& theta1, const ParamVector& theta2,
                           const ModelSpec& model) {
    if (theta1.values.size() != theta2.values.size()) throw invalid_argument("theta length mismatch");
    const std::size_t n = theta1.values.size();
    double affinity = 1.0;
    switch (model.kind()) {
        case ModelKind::gaussian: {
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = theta1.values[i] - theta2.values[i];
                ss += d * d;
            }
            affinity = std::exp(-ss / (8.0 * model.variance()));
            break;
        }
        case ModelKind::poisson: {
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = std::sqrt(theta1.values[i]) - std::sqrt(theta2.values[i]);
                ss += d * d;
            }
            affinity = std::exp(-0.5 * ss);
            break;
        }
        case ModelKind::multinomial: {
            double a = 0.0;
            for (std::size_t i = 0; i < n; ++i) a += std::sqrt(theta1.values[i] * theta2.values[i]);
            affinity = std::pow(std::clamp(a, 0.0, 1.0), static_cast<double>(model.n_total()));
            break;
        }
    }
    return std::clamp(2.0 * (1.0 - affinity), 0.0, 2.0);
}

// Kullback-Leibler divergence K(p_theta1 || p_theta2); +inf where theta1
// puts mass that theta2 does not. 0 log 0 = 0 throughout.
inline double kl_div(const ParamVector& theta1, const ParamVector& theta2,
                     const ModelSpec& model) {
    if (theta1.values.size() != theta2.values.size()) throw invalid_argument("theta length mismatch");
    const std::size_t n = theta1.values.size();
    double kl = 0.0;
    switch (model.kind()) {
        case ModelKind::gaussian: {
            for (std::size_t i = 0; i < n; ++i) {
                const double d = theta1.values[i] - theta2.values[i];
                kl += d * d;
            }
            kl /= 2.0 * model.variance();
            break;
        }
        case ModelKind::poisson:
            for (std::size_t i = 0; i < n; ++i) {
                const double t = theta1.values[i], u = theta2.values[i];
                kl += u - t;
                if (t > 0.0) {
                    if (u == 0.0) return kPosInf;
                    kl += t * std::log(t / u);
                }
            }
            break;
        case ModelKind::multinomial: {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double t = theta1.values[i], u = theta2.values[i];
                if (t > 0.0) {
                    if (u == 0.0) return kPosInf;
                    sum += t * std::log(t / u);
                }
            }
            kl = static_cast<double>(model.n_total()) * sum;
            break;
        }
    }
    return std::max(kl, 0.0);
}

}  // namespace mslik
