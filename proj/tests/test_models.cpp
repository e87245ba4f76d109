#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mslik/models.hpp"
#include "mslik/multiscale.hpp"
#include "mslik/partition.hpp"
#include "mslik/rng.hpp"
#include "mslik/signal.hpp"

using namespace mslik;

namespace {

ParamVector make_theta(ModelKind kind, std::vector<double> v) {
    ParamVector t;
    t.model = kind;
    t.values = std::move(v);
    return t;
}

ObservationVector make_obs(ModelKind kind, std::vector<double> v) {
    ObservationVector x;
    x.model = kind;
    x.values = std::move(v);
    return x;
}

// Random valid theta for a model; count models stay strictly positive so
// decompositions are informative.
ParamVector random_theta(ModelKind kind, int n, Rng& rng) {
    ParamVector t;
    t.model = kind;
    t.values.resize(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (auto& v : t.values) {
        if (kind == ModelKind::gaussian) {
            v = rng.gaussian(0.0, 3.0);
        } else {
            v = 0.2 + 5.0 * rng.uniform();
        }
        sum += v;
    }
    if (kind == ModelKind::multinomial) {
        for (auto& v : t.values) v /= sum;
    }
    return t;
}

ModelSpec spec_for(ModelKind kind, std::int64_t n_total = 12) {
    switch (kind) {
        case ModelKind::gaussian: return ModelSpec::gaussian(1.3);
        case ModelKind::poisson: return ModelSpec::poisson();
        case ModelKind::multinomial: return ModelSpec::multinomial(n_total);
    }
    throw invalid_argument("?");
}

const ModelKind kAllKinds[] = {ModelKind::gaussian, ModelKind::poisson, ModelKind::multinomial};

}  // namespace

TEST_CASE("loglik_direct hand values") {
    CHECK(loglik_direct(make_obs(ModelKind::gaussian, {1, 3}), make_theta(ModelKind::gaussian, {0, 0}),
                        ModelSpec::gaussian(1.0)) ==
          doctest::Approx(-std::log(2.0 * std::numbers::pi) - 5.0).epsilon(1e-12));
    CHECK(loglik_direct(make_obs(ModelKind::poisson, {1, 2}), make_theta(ModelKind::poisson, {1, 1}),
                        ModelSpec::poisson()) == doctest::Approx(-2.0 - std::log(2.0)).epsilon(1e-12));
    CHECK(loglik_direct(make_obs(ModelKind::multinomial, {1, 2}),
                        make_theta(ModelKind::multinomial, {1.0 / 3.0, 2.0 / 3.0}),
                        ModelSpec::multinomial(3)) ==
          doctest::Approx(std::log(4.0 / 9.0)).epsilon(1e-12));

    // Absolute-continuity failure reports explicit -inf.
    CHECK(loglik_direct(make_obs(ModelKind::poisson, {1}), make_theta(ModelKind::poisson, {0}),
                        ModelSpec::poisson()) == kNegInf);
    CHECK(loglik_direct(make_obs(ModelKind::poisson, {0}), make_theta(ModelKind::poisson, {0}),
                        ModelSpec::poisson()) == 0.0);
}

TEST_CASE("decompose: worked examples") {
    const PartitionTree dy4 = dyadic_crp(4);
    const MultiscaleParams poi =
        decompose(make_theta(ModelKind::poisson, {1, 2, 3, 4}), dy4, ModelSpec::poisson());
    CHECK(poi.root == doctest::Approx(10.0));
    REQUIRE(poi.entries.size() == 3);
    for (const auto& e : poi.entries) {
        if (e.parent == Interval{0, 4}) CHECK(e.omega == doctest::Approx(0.3).epsilon(1e-14));
        if (e.parent == Interval{0, 2}) CHECK(e.omega == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
        if (e.parent == Interval{2, 4}) CHECK(e.omega == doctest::Approx(3.0 / 7.0).epsilon(1e-14));
    }

    const PartitionTree dy2 = dyadic_crp(2);
    const MultiscaleParams gauss =
        decompose(make_theta(ModelKind::gaussian, {0, 2}), dy2, ModelSpec::gaussian(1.0));
    CHECK(split_var_factor({0, 2}, 1) == doctest::Approx(0.5));
    CHECK(gauss.entries.at(0).omega == doctest::Approx(1.0));
    // Implied left-child aggregate rho * theta_I - omega recovers theta_l = 0.
    CHECK(split_rho({0, 2}, 1) * gauss.root - gauss.entries.at(0).omega == doctest::Approx(0.0));

    // Constant theta gives trivial omegas in every model.
    for (ModelKind kind : kAllKinds) {
        const ModelSpec model = spec_for(kind, 8);
        const double level = kind == ModelKind::multinomial ? 0.25 : 2.0;
        const MultiscaleParams ms = decompose(make_theta(kind, {level, level, level, level}), dy4, model);
        for (const auto& e : ms.entries) {
            CHECK(e.omega == doctest::Approx(trivial_omega(kind, e.parent, e.split)).epsilon(1e-14));
        }
    }
}

TEST_CASE("reconstruct: worked examples and round trip") {
    const PartitionTree dy4 = dyadic_crp(4);

    MultiscaleParams uniform;
    uniform.root = 8.0;
    for (int id : dy4.internal_ids()) {
        const TreeNode& nd = dy4.node(id);
        uniform.entries.push_back({nd.cell, nd.split, trivial_omega(ModelKind::poisson, nd.cell, nd.split)});
    }
    const ParamVector spread = reconstruct(uniform, dy4, ModelSpec::poisson());
    for (double v : spread.values) CHECK(v == doctest::Approx(2.0));

    MultiscaleParams single;
    single.root = 1.0;
    single.entries.push_back({{0, 2}, 1, 0.25});
    const ParamVector two = reconstruct(single, dyadic_crp(2), ModelSpec::multinomial(4));
    CHECK(two.values.at(0) == doctest::Approx(0.25));
    CHECK(two.values.at(1) == doctest::Approx(0.75));

    MultiscaleParams missing;
    missing.root = 8.0;
    CHECK_THROWS_AS(reconstruct(missing, dy4, ModelSpec::poisson()), invalid_argument);

    Rng rng(41);
    for (ModelKind kind : kAllKinds) {
        const ModelSpec model = spec_for(kind);
        for (int trial = 0; trial < 40; ++trial) {
            const int n = 2 + static_cast<int>(rng.next_u64() % 15);
            const PartitionTree tree = random_crp(n, rng);
            const ParamVector theta = random_theta(kind, n, rng);
            const ParamVector back = reconstruct(decompose(theta, tree, model), tree, model);
            for (int i = 0; i < n; ++i) {
                const double a = theta.values[static_cast<std::size_t>(i)];
                const double b = back.values[static_cast<std::size_t>(i)];
                CHECK(std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a)));
            }
        }
    }
}

TEST_CASE("factorization identity: worked examples") {
    // Gaussian: root N(0, 2) at X = 4 plus conditional N(2, 0.5) at X_l = 1.
    const PartitionTree dy2 = dyadic_crp(2);
    const ParamVector theta_g = make_theta(ModelKind::gaussian, {0, 0});
    const ObservationVector x_g = make_obs(ModelKind::gaussian, {1, 3});
    const ModelSpec gauss = ModelSpec::gaussian(1.0);
    const double fact_g = loglik_factorized(x_g, decompose(theta_g, dy2, gauss), dy2, gauss);
    CHECK(fact_g == doctest::Approx(-std::log(2.0 * std::numbers::pi) - 5.0).epsilon(1e-12));
    CHECK(log_normal_pdf(4.0, 0.0, 2.0) + log_normal_pdf(1.0, 2.0, 0.5) ==
          doctest::Approx(fact_g).epsilon(1e-12));

    // Poisson: Poisson(2) at 3 plus Binomial(3, 1/2) at 1.
    const ParamVector theta_p = make_theta(ModelKind::poisson, {1, 1});
    const ObservationVector x_p = make_obs(ModelKind::poisson, {1, 2});
    const ModelSpec poi = ModelSpec::poisson();
    const double fact_p = loglik_factorized(x_p, decompose(theta_p, dy2, poi), dy2, poi);
    CHECK(fact_p == doctest::Approx(-2.0 - std::log(2.0)).epsilon(1e-12));
    CHECK(log_poisson_pmf(3.0, 2.0) + log_binomial_pmf(1.0, 3.0, 0.5) ==
          doctest::Approx(fact_p).epsilon(1e-12));

    // Multinomial root term contributes exactly zero.
    const ParamVector theta_m = make_theta(ModelKind::multinomial, {0.5, 0.5});
    const ObservationVector x_m = make_obs(ModelKind::multinomial, {2, 2});
    const ModelSpec multi = ModelSpec::multinomial(4);
    const MultiscaleParams ms_m = decompose(theta_m, dy2, multi);
    CHECK(loglik_factorized(x_m, ms_m, dy2, multi) ==
          doctest::Approx(loglik_direct(x_m, theta_m, multi)).epsilon(1e-12));
}

TEST_CASE("factorization identity: randomized, non-dyadic trees included") {
    Rng rng(20240518);
    for (ModelKind kind : kAllKinds) {
        for (int trial = 0; trial < 60; ++trial) {
            const int n = 2 + static_cast<int>(rng.next_u64() % 63);
            const ModelSpec model = spec_for(kind, 3 * n);
            const PartitionTree tree = random_crp(n, rng);
            const ParamVector theta = random_theta(kind, n, rng);
            const ObservationVector x = draw_observations(theta, model, rng.next_u64());
            const double direct = loglik_direct(x, theta, model);
            const double fact = loglik_factorized(x, decompose(theta, tree, model), tree, model);
            CHECK(std::abs(direct - fact) <= 1e-9 * (1.0 + std::abs(direct)));
        }
    }
}

TEST_CASE("coefficient correspondence: trivial omega iff zero haar coefficient") {
    const PartitionTree dy8 = dyadic_crp(8);
    // Piecewise constant with a jump at 4: only ancestors of the jump are
    // nontrivial.
    for (ModelKind kind : kAllKinds) {
        const ModelSpec model = spec_for(kind, 16);
        std::vector<double> v = {1, 1, 1, 1, 3, 3, 3, 3};
        if (kind == ModelKind::multinomial) {
            for (auto& t : v) t /= 16.0;
        }
        const ParamVector theta = make_theta(kind, v);
        const MultiscaleParams ms = decompose(theta, dy8, model);
        for (const auto& e : ms.entries) {
            const double coeff = haar_coefficient(theta.values, haar_vector(e.parent, e.split));
            const bool trivial = std::abs(e.omega - trivial_omega(kind, e.parent, e.split)) <= 1e-12;
            CHECK(trivial == (std::abs(coeff) <= 1e-12));
        }
    }
}

TEST_CASE("node_costs: worked examples") {
    const PartitionTree dy2 = dyadic_crp(2);

    // Poisson: all mass on the left child.
    {
        const std::vector<double> x = {4, 0};
        const SumPyramid p = sum_pyramid(x, dy2);
        const NodeCosts c = node_costs(p, {0, 2}, 1, ModelSpec::poisson(), 1.0);
        CHECK(c.kill_cost == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-12));
        CHECK(c.keep_data_cost == doctest::Approx(0.0));
        CHECK(c.omega_hat == doctest::Approx(1.0));
        CHECK(c.keep_total_cost == doctest::Approx(2.0));
    }
    // Empty interval: keep and kill coincide at zero, omega_hat = rho.
    {
        const std::vector<double> x = {0, 0};
        const SumPyramid p = sum_pyramid(x, dy2);
        const NodeCosts c = node_costs(p, {0, 2}, 1, ModelSpec::poisson(), 1.0);
        CHECK(c.kill_cost == 0.0);
        CHECK(c.keep_data_cost == 0.0);
        CHECK(c.omega_hat == doctest::Approx(0.5));
    }
    // Gaussian gap equals the squared haar coefficient over 2 sigma^2.
    {
        const std::vector<double> x = {1, 3};
        const SumPyramid p = sum_pyramid(x, dy2);
        const NodeCosts c = node_costs(p, {0, 2}, 1, ModelSpec::gaussian(1.0), 1.0);
        CHECK(c.gain() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("gaussian GLR gap identity at every node") {
    Rng rng(5150);
    const ModelSpec model = ModelSpec::gaussian(0.7);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 30);
        std::vector<double> x(static_cast<std::size_t>(n));
        for (auto& v : x) v = rng.gaussian(0.0, 2.0);
        const PartitionTree tree = random_crp(n, rng);
        const SumPyramid p = sum_pyramid(x, tree);
        for (int id : tree.internal_ids()) {
            const TreeNode& nd = tree.node(id);
            const NodeCosts c = node_costs(p, nd.cell, nd.split, model, 0.0);
            const double coeff = haar_coefficient(x, haar_vector(nd.cell, nd.split));
            const double expected = coeff * coeff / (2.0 * model.variance());
            CHECK(c.gain() == doctest::Approx(expected).epsilon(1e-10));
            CHECK(c.keep_data_cost <= c.kill_cost + 1e-12);
        }
    }
}

TEST_CASE("cascade_kill_cost: examples and tree invariance") {
    const ModelSpec poi = ModelSpec::poisson();
    CHECK(cascade_kill_cost(make_obs(ModelKind::poisson, {5}), {0, 1}, poi) == 0.0);
    CHECK(cascade_kill_cost(make_obs(ModelKind::poisson, {2, 2}), {0, 2}, poi) ==
          doctest::Approx(-std::log(6.0 / 16.0)).epsilon(1e-12));

    Rng rng(777);
    for (ModelKind kind : kAllKinds) {
        const ModelSpec model = spec_for(kind, 24);
        for (int trial = 0; trial < 8; ++trial) {
            const int n = 2 + static_cast<int>(rng.next_u64() % 5);  // enumerable sizes
            ParamVector theta = random_theta(kind, n, rng);
            const ObservationVector x = draw_observations(theta, spec_for(kind, 24), rng.next_u64());
            const double reference = cascade_kill_cost(x, {0, n}, model);
            for (const auto& tree : enumerate_crps(n)) {
                const SumPyramid p = sum_pyramid(x.values, tree);
                double total = 0.0;
                for (int id : tree.internal_ids()) {
                    const TreeNode& nd = tree.node(id);
                    total += node_costs(p, nd.cell, nd.split, model, 0.0).kill_cost;
                }
                CHECK(std::abs(total - reference) <= 1e-9 * (1.0 + std::abs(reference)));
            }
        }
    }
}

TEST_CASE("hellinger_sq and kl_div") {
    const ModelSpec poi = ModelSpec::poisson();
    CHECK(hellinger_sq(make_theta(ModelKind::poisson, {1}), make_theta(ModelKind::poisson, {1}), poi) ==
          doctest::Approx(0.0));
    CHECK(hellinger_sq(make_theta(ModelKind::poisson, {1}), make_theta(ModelKind::poisson, {4}), poi) ==
          doctest::Approx(2.0 * (1.0 - std::exp(-0.5))).epsilon(1e-12));
    CHECK(hellinger_sq(make_theta(ModelKind::multinomial, {1, 0}),
                       make_theta(ModelKind::multinomial, {0, 1}), ModelSpec::multinomial(1)) ==
          doctest::Approx(2.0));

    CHECK(kl_div(make_theta(ModelKind::poisson, {1}), make_theta(ModelKind::poisson, {2}), poi) ==
          doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-12));
    CHECK(kl_div(make_theta(ModelKind::poisson, {1}), make_theta(ModelKind::poisson, {0}), poi) == kPosInf);
    CHECK(kl_div(make_theta(ModelKind::gaussian, {1, 2}), make_theta(ModelKind::gaussian, {1, 2}),
                 ModelSpec::gaussian(2.0)) == doctest::Approx(0.0));

    // Range, positivity, identity of indiscernibles.
    Rng rng(31337);
    for (ModelKind kind : kAllKinds) {
        const ModelSpec model = spec_for(kind, 20);
        for (int trial = 0; trial < 30; ++trial) {
            const int n = 1 + static_cast<int>(rng.next_u64() % 10);
            const ParamVector a = random_theta(kind, n, rng);
            const ParamVector b = random_theta(kind, n, rng);
            const double h = hellinger_sq(a, b, model);
            const double k = kl_div(a, b, model);
            CHECK(h >= 0.0);
            CHECK(h <= 2.0);
            CHECK(k >= 0.0);
            CHECK(hellinger_sq(a, a, model) <= 1e-12);
            CHECK(kl_div(a, a, model) <= 1e-12);
            bool equal = true;
            for (int i = 0; i < n; ++i) {
                if (std::abs(a.values[static_cast<std::size_t>(i)] - b.values[static_cast<std::size_t>(i)]) > 1e-12) equal = false;
            }
            if (!equal) {
                CHECK(h > 0.0);
                CHECK(k > 0.0);
            }
        }
    }
}

TEST_CASE("poisson KL domination by scaled squared error") {
    Rng rng(2112);
    const ModelSpec poi = ModelSpec::poisson();
    const double c = 0.5, C = 6.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_u64() % 12);
        ParamVector a, b;
        a.model = b.model = ModelKind::poisson;
        for (int i = 0; i < n; ++i) {
            a.values.push_back(c + (C - c) * rng.uniform());
            b.values.push_back(c + (C - c) * rng.uniform());
        }
        double sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = a.values[static_cast<std::size_t>(i)] - b.values[static_cast<std::size_t>(i)];
            sq += d * d;
        }
        CHECK(kl_div(a, b, poi) <= sq / c + 1e-12);
    }
}

TEST_CASE("sample_theta_from_signal") {
    const SignalSpec unit = SignalSpec::constant(1.0);
    const ParamVector poi = sample_theta_from_signal(unit, 4, ModelSpec::poisson());
    for (double v : poi.values) CHECK(v == doctest::Approx(1.0));
    const ParamVector mul = sample_theta_from_signal(unit, 4, ModelSpec::multinomial(8));
    for (double v : mul.values) CHECK(v == doctest::Approx(0.25));

    const SignalSpec step = SignalSpec::blocks({0.5}, {1.0, 3.0});
    const ParamVector theta = sample_theta_from_signal(step, 4, ModelSpec::poisson());
    CHECK(theta.values == std::vector<double>{1, 1, 3, 3});
    const ParamVector thm = sample_theta_from_signal(step, 4, ModelSpec::multinomial(8));
    CHECK(thm.values.at(0) == doctest::Approx(0.125));
    CHECK(thm.values.at(3) == doctest::Approx(0.375));

    const SignalSpec neg = SignalSpec::constant(-1.0);
    CHECK_THROWS_AS(sample_theta_from_signal(neg, 4, ModelSpec::poisson()), invalid_signal);
}

TEST_CASE("draw_observations: determinism and model laws") {
    for (ModelKind kind : kAllKinds) {
        const ModelSpec model = spec_for(kind, 40);
        Rng rng(kind == ModelKind::gaussian ? 1u : 2u);
        const ParamVector theta = random_theta(kind, 8, rng);
        const ObservationVector a = draw_observations(theta, model, 123456789);
        const ObservationVector b = draw_observations(theta, model, 123456789);
        CHECK(a.values == b.values);
        validate(a, model);
    }

    // Zero intensity draws zero counts.
    const ObservationVector zero =
        draw_observations(make_theta(ModelKind::poisson, {0, 0}), ModelSpec::poisson(), 9);
    CHECK(zero.values == std::vector<double>{0, 0});

    // Poisson moment check: mean of 10000 draws within 3 sigma.
    {
        const ParamVector theta = make_theta(ModelKind::poisson, {5});
        double sum = 0.0;
        for (int r = 0; r < 10000; ++r) {
            sum += draw_observations(theta, ModelSpec::poisson(), mix_seed(77, 1, static_cast<std::uint64_t>(r)))
                       .values.at(0);
        }
        CHECK(std::abs(sum / 10000.0 - 5.0) <= 3.0 * std::sqrt(5.0 / 10000.0));
    }

    // Multinomial totals are exact; cell means track n * theta.
    {
        const ParamVector theta = make_theta(ModelKind::multinomial, {0.125, 0.125, 0.375, 0.375});
        const ModelSpec model = ModelSpec::multinomial(64);
        std::vector<double> mean(4, 0.0);
        const int reps = 4000;
        for (int r = 0; r < reps; ++r) {
            const ObservationVector x = draw_observations(theta, model, mix_seed(3, 4, static_cast<std::uint64_t>(r)));
            double tot = 0.0;
            for (int i = 0; i < 4; ++i) {
                mean[static_cast<std::size_t>(i)] += x.values[static_cast<std::size_t>(i)];
                tot += x.values[static_cast<std::size_t>(i)];
            }
            CHECK(tot == 64.0);
        }
        for (int i = 0; i < 4; ++i) {
            const double expect = 64.0 * theta.values[static_cast<std::size_t>(i)];
            const double sd = std::sqrt(64.0 * theta.values[static_cast<std::size_t>(i)] *
                                        (1 - theta.values[static_cast<std::size_t>(i)]) / reps);
            CHECK(std::abs(mean[static_cast<std::size_t>(i)] / reps - expect) <= 4.0 * sd);
        }
    }
}

TEST_CASE("validation rejects out-of-domain vectors") {
    CHECK_THROWS_AS(validate(make_theta(ModelKind::poisson, {-1.0}), ModelSpec::poisson()), invalid_params);
    CHECK_THROWS_AS(validate(make_theta(ModelKind::multinomial, {0.7, 0.7}), ModelSpec::multinomial(2)),
                    invalid_params);
    CHECK_THROWS_AS(validate(make_obs(ModelKind::poisson, {1.5}), ModelSpec::poisson()), invalid_params);
    CHECK_THROWS_AS(validate(make_obs(ModelKind::multinomial, {1, 1}), ModelSpec::multinomial(3)),
                    invalid_params);
    CHECK_THROWS_AS(ModelSpec::gaussian(0.0), invalid_argument);
    CHECK_THROWS_AS(ModelSpec::multinomial(0), invalid_argument);
    CHECK_THROWS_AS(log_binomial_pmf(1, 2, 1.5), invalid_params);
}
