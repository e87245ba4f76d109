#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "mslik/errors.hpp"
#include "mslik/estimators.hpp"
#include "mslik/models.hpp"
#include "mslik/rng.hpp"
#include "mslik/signal.hpp"

namespace mslik {

struct RiskPoint {
    int n_leaves = 0;
    double risk = 0.0;    // mean of H^2 / N over replicates
    double stderr_ = 0.0;
    int reps = 0;
};

struct SlopeFit {
    double slope = 0.0;
    double stderr_ = 0.0;
};

struct RiskCurve {
    std::vector<RiskPoint> points;  // n strictly increasing
    double slope = std::numeric_limits<double>::quiet_NaN();
    double slope_se = std::numeric_limits<double>::quiet_NaN();
};

// Ordinary least squares of ln(risk) on ln(n). Needs at least three grid
// points with positive risks.
inline SlopeFit fit_rate_slope(const RiskCurve& curve) {
    const std::size_t m = curve.points.size();
    if (m < 3) throw invalid_data("rate slope needs >= 3 grid points");
    std::vector<double> lx(m), ly(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (!(curve.points[i].risk > 0.0)) throw invalid_data("rate slope needs positive risks");
        lx[i] = std::log(static_cast<double>(curve.points[i].n_leaves));
        ly[i] = std::log(curve.points[i].risk);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(m);
    my /= static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw invalid_data("rate slope needs distinct grid sizes");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = ly[i] - my - fit.slope * (lx[i] - mx);
        rss += r * r;
    }
    fit.stderr_ = m > 2 ? std::sqrt(rss / (static_cast<double>(m) - 2.0) / sxx) : 0.0;
    return fit;
}

namespace detail {

inline EstimateResult run_estimator(EstimatorKind kind, const ObservationVector& x,
                                    const ModelSpec& model, const PenaltyConfig& pen) {
    switch (kind) {
        case EstimatorKind::threshold:
            return estimate_threshold(x, model, pen, dyadic_crp(x.size()));
        case EstimatorKind::rdp:
            return estimate_rdp(x, model, pen, dyadic_crp(x.size()));
        case EstimatorKind::rp:
            return estimate_rp(x, model, pen);
    }
    throw invalid_config("unknown estimator kind");
}

}  // namespace detail

// Monte Carlo estimate of the risk (1/N) E[H^2(p_thetahat, p_theta)]
// over a grid of sample sizes. Replicate r at size n draws with the seed
// mix_seed(master_seed, n, r), so the curve is reproducible bit for bit
// and replicates may run concurrently (jobs > 1) without changing it.
// For the multinomial model the sample total tracks the grid
// (n_total = n_leaves), matching the n ~ N prescription.
inline RiskCurve monte_carlo_risk(const SignalSpec& signal_spec, const ModelSpec& model,
                                  EstimatorKind estimator, double gamma,
                                  std::span<const int> n_list, int reps,
                                  std::uint64_t master_seed, int jobs = 1) {
    if (reps < 2) throw invalid_config("monte_carlo_risk needs reps >= 2");
    if (n_list.empty()) throw invalid_config("monte_carlo_risk needs a nonempty size grid");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        const int n = n_list[i];
        if (n < 1) throw invalid_config("grid sizes must be >= 1");
        if (i > 0 && n <= n_list[i - 1]) throw invalid_config("grid sizes must be strictly increasing");
        if (estimator != EstimatorKind::rp && (n & (n - 1)) != 0) {
            throw invalid_config("threshold/rdp sweeps need power-of-two grid sizes");
        }
    }
    const Signal signal = make_signal(signal_spec);
    if (jobs < 1) jobs = 1;

    RiskCurve curve;
    for (const int n : n_list) {
        const ModelSpec point_model =
            model.kind() == ModelKind::multinomial ? ModelSpec::multinomial(n) : model;
        const ParamVector theta = sample_theta_from_signal(signal, n, point_model);
        const PenaltyConfig pen(gamma, n);
        std::vector<double> losses(static_cast<std::size_t>(reps), 0.0);

        const auto worker = [&](int first, int last) {
            for (int r = first; r < last; ++r) {
                const std::uint64_t seed =
                    mix_seed(master_seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r));
                const ObservationVector x = draw_observations(theta, point_model, seed);
                const EstimateResult est = detail::run_estimator(estimator, x, point_model, pen);
                losses[static_cast<std::size_t>(r)] =
                    hellinger_sq(est.theta_hat, theta, point_model) / static_cast<double>(n);
            }
        };
        if (jobs == 1) {
            worker(0, reps);
        } else {
            std::vector<std::thread> pool;
            const int chunk = (reps + jobs - 1) / jobs;
            for (int j = 0; j < jobs; ++j) {
                const int first = j * chunk;
                const int last = std::min(reps, first + chunk);
                if (first >= last) break;
                pool.emplace_back(worker, first, last);
            }
            for (auto& t : pool) t.join();
        }

        // Fixed-order reduction keeps the aggregate independent of thread
        // scheduling.
        double mean = 0.0;
        for (double v : losses) mean += v;
        mean /= static_cast<double>(reps);
        double var = 0.0;
        for (double v : losses) var += (v - mean) * (v - mean);
        var /= static_cast<double>(reps - 1);
        curve.points.push_back({n, mean, std::sqrt(var / static_cast<double>(reps)), reps});
    }

    if (curve.points.size() >= 3 &&
        std::all_of(curve.points.begin(), curve.points.end(),
                    [](const RiskPoint& p) { return p.risk > 0.0; })) {
        const SlopeFit fit = fit_rate_slope(curve);
        curve.slope = fit.slope;
        curve.slope_se = fit.stderr_;
    }
    return curve;
}

struct KraftReport {
    int n_leaves = 0;
    double gamma = 0.0;
    int levels = 0;
    bool exhaustive_available = false;
    double exhaustive_sum = std::numeric_limits<double>::quiet_NaN();
    double formula_bound = 0.0;
    bool bounded_by_one = false;  // both sums <= 1
};

// The Kraft-type sum over grid-valued vectors, exactly (by enumeration,
// when levels^n is small enough) and through the binomial overcounting
// chain sum_d C(N-1, d-1) levels^d N^(-gamma d). The exhaustive sum never
// exceeds the chain, and both are <= 1 once gamma >= 3/2 and N >= 3.
inline KraftReport kraft_sum(int n_leaves, double gamma) {
    if (n_leaves < 2) throw invalid_argument("kraft_sum needs n_leaves >= 2");
    if (!(gamma >= 0.0)) throw invalid_argument("gamma must be >= 0");
    KraftReport rep;
    rep.n_leaves = n_leaves;
    rep.gamma = gamma;
    rep.levels = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_leaves))));
    const double log_n = std::log(static_cast<double>(n_leaves));

    const double space = std::pow(static_cast<double>(rep.levels), n_leaves);
    if (space <= 2e7) {
        rep.exhaustive_available = true;
        double total = 0.0;
        std::vector<int> idx(static_cast<std::size_t>(n_leaves), 0);
        while (true) {
            int runs = 1;
            for (int i = 1; i < n_leaves; ++i) {
                if (idx[static_cast<std::size_t>(i)] != idx[static_cast<std::size_t>(i - 1)]) ++runs;
            }
            total += std::exp(-gamma * log_n * runs);
            int pos = n_leaves - 1;
            while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == rep.levels) {
                idx[static_cast<std::size_t>(pos)] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
        rep.exhaustive_sum = total;
    }

    double bound = 0.0;
    const double log_levels = std::log(static_cast<double>(rep.levels));
    for (int d = 1; d <= n_leaves; ++d) {
        const double log_term = log_choose(n_leaves - 1, d - 1) + d * log_levels - gamma * d * log_n;
        bound += std::exp(log_term);
    }
    rep.formula_bound = bound;
    rep.bounded_by_one =
        bound <= 1.0 + 1e-12 && (!rep.exhaustive_available || rep.exhaustive_sum <= 1.0 + 1e-12);
    return rep;
}

struct OracleBoundReport {
    double lhs_mean = 0.0;   // Monte Carlo mean of H^2(p_thetahat, p_theta)
    double lhs_se = 0.0;
    double rhs = 0.0;        // min over the grid family of KL + 2 pen
    double rhs_kl = 0.0;     // KL part of the minimizing candidate
    double rhs_pen = 0.0;    // penalty part of the minimizing candidate
    int reps = 0;
    bool pass = false;       // lhs_mean <= rhs + 3 * lhs_se
};

// Desk-scale check of the oracle inequality: the expected squared
// Hellinger loss of the quantized penalized MLE against the exhaustive
// minimum of KL + 2 * pen over the same grid family, with
// pen(theta') = gamma * ln(N) * run_count(theta').
inline OracleBoundReport oracle_bound_check(const ParamVector& theta, const ModelSpec& model,
                                            double gamma, const QuantizationGrid& grid, int reps,
                                            std::uint64_t seed) {
    validate(theta, model);
    const int n = theta.size();
    if (n > 6) throw resource_limit("oracle_bound_check capped at n = 6");
    if (reps < 2) throw invalid_config("oracle_bound_check needs reps >= 2");
    grid.check();
    const PenaltyConfig pen(gamma, n);

    OracleBoundReport rep;
    rep.reps = reps;

    // Exhaustive right-hand side over the grid family.
    double best = std::numeric_limits<double>::infinity();
    ParamVector candidate;
    candidate.model = model.kind();
    candidate.values.assign(static_cast<std::size_t>(n), grid.value(0));
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    while (true) {
        for (int i = 0; i < n; ++i) candidate.values[static_cast<std::size_t>(i)] = grid.value(idx[static_cast<std::size_t>(i)]);
        bool feasible = true;
        if (model.kind() == ModelKind::multinomial) {
            double sum = 0.0;
            for (double v : candidate.values) sum += v;
            feasible = std::abs(sum - 1.0) <= 1e-9;
        }
        if (feasible) {
            const double kl = kl_div(theta, candidate, model);
            if (std::isfinite(kl)) {
                const double pn = pen.lambda * run_count(candidate.values);
                const double total = kl + 2.0 * pn;
                if (total < best) {
                    best = total;
                    rep.rhs_kl = kl;
                    rep.rhs_pen = pn;
                }
            }
        }
        int pos = n - 1;
        while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == grid.levels) {
            idx[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    if (!std::isfinite(best)) throw invalid_config("no feasible grid candidate with finite divergence");
    rep.rhs = best;

    double mean = 0.0;
    std::vector<double> losses(static_cast<std::size_t>(reps), 0.0);
    for (int r = 0; r < reps; ++r) {
        const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r));
        const ObservationVector x = draw_observations(theta, model, s);
        const EstimateResult est = quantized_penalized_mle(x, model, pen, grid);
        losses[static_cast<std::size_t>(r)] = hellinger_sq(est.theta_hat, theta, model);
        mean += losses[static_cast<std::size_t>(r)];
    }
    mean /= static_cast<double>(reps);
    double var = 0.0;
    for (double v : losses) var += (v - mean) * (v - mean);
    var /= static_cast<double>(reps - 1);
    rep.lhs_mean = mean;
    rep.lhs_se = std::sqrt(var / static_cast<double>(reps));
    rep.pass = rep.lhs_mean <= rep.rhs + 3.0 * rep.lhs_se;
    return rep;
}

}  // namespace mslik
