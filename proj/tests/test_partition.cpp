#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "mslik/partition.hpp"
#include "mslik/rng.hpp"

using namespace mslik;

namespace {

std::string tree_signature(const PartitionTree& t) {
    std::string sig;
    for (int id = 0; id < t.size(); ++id) {
        const TreeNode& nd = t.node(id);
        sig += std::to_string(nd.cell.start) + ":" + std::to_string(nd.cell.end) + ":" +
               std::to_string(nd.split) + ";";
    }
    return sig;
}

// All partial trees of [0, n) as ordered split lists (parent before children).
std::vector<std::vector<std::pair<Interval, int>>> partial_split_lists(const Interval& iv) {
    std::vector<std::vector<std::pair<Interval, int>>> out = {{}};
    for (int s = iv.start + 1; s < iv.end; ++s) {
        for (const auto& l : partial_split_lists({iv.start, s})) {
            for (const auto& r : partial_split_lists({s, iv.end})) {
                std::vector<std::pair<Interval, int>> combined = {{iv, s}};
                combined.insert(combined.end(), l.begin(), l.end());
                combined.insert(combined.end(), r.begin(), r.end());
                out.push_back(std::move(combined));
            }
        }
    }
    return out;
}

long catalan(int k) {
    long c = 1;
    for (int i = 0; i < k; ++i) c = c * 2 * (2 * i + 1) / (i + 2);
    return c;
}

}  // namespace

TEST_CASE("dyadic_crp shapes") {
    const PartitionTree t1 = dyadic_crp(1);
    CHECK(t1.size() == 1);
    CHECK(t1.internal_ids().empty());

    const PartitionTree t4 = dyadic_crp(4);
    CHECK(t4.complete());
    CHECK(t4.dyadic());
    std::set<std::string> internals;
    for (int id : t4.internal_ids()) {
        const TreeNode& nd = t4.node(id);
        internals.insert(to_string(nd.cell) + "@" + std::to_string(nd.split));
    }
    CHECK(internals == std::set<std::string>{"[0,4)@2", "[0,2)@1", "[2,4)@3"});

    const PartitionTree t8 = dyadic_crp(8);
    CHECK(t8.internal_ids().size() == 7);
    CHECK(t8.leaf_cells().size() == 8);

    CHECK_THROWS_AS(dyadic_crp(0), invalid_argument);
    CHECK_THROWS_AS(dyadic_crp(3), invalid_argument);
    CHECK_THROWS_AS(dyadic_crp(6), invalid_argument);
}

TEST_CASE("crp_from_splits") {
    const std::vector<std::pair<Interval, int>> comb = {{{0, 3}, 1}, {{1, 3}, 2}};
    const PartitionTree t = crp_from_splits(3, comb);
    CHECK(t.complete());
    CHECK(t.node(0).split == 1);
    CHECK(t.find({1, 3}) >= 0);

    const PartitionTree partial = crp_from_splits(2, {});
    CHECK_FALSE(partial.complete());
    CHECK(partial.leaf_cells() == std::vector<Interval>{{0, 2}});

    const std::vector<std::pair<Interval, int>> unbalanced = {{{0, 4}, 3}, {{0, 3}, 1}, {{1, 3}, 2}};
    const PartitionTree t4 = crp_from_splits(4, unbalanced);
    CHECK(t4.complete());
    CHECK(t4.internal_ids().size() == 3);
    CHECK(t4.leaf_cells() == std::vector<Interval>{{0, 1}, {1, 2}, {2, 3}, {3, 4}});

    const std::vector<std::pair<Interval, int>> bad_edge = {{{0, 3}, 3}};
    CHECK_THROWS_AS(crp_from_splits(3, bad_edge), invalid_split);
    const std::vector<std::pair<Interval, int>> not_leaf = {{{0, 3}, 1}, {{0, 3}, 2}};
    CHECK_THROWS_AS(crp_from_splits(3, not_leaf), invalid_split);
}

TEST_CASE("enumerate_crps counts Catalan(n-1), all distinct") {
    CHECK(enumerate_crps(2).size() == 1);
    CHECK(enumerate_crps(3).size() == 2);
    CHECK(enumerate_crps(4).size() == 5);
    for (int n = 2; n <= 7; ++n) {
        const auto trees = enumerate_crps(n);
        CHECK(trees.size() == static_cast<std::size_t>(catalan(n - 1)));
        std::set<std::string> sigs;
        for (const auto& t : trees) {
            CHECK(t.complete());
            sigs.insert(tree_signature(t));
        }
        CHECK(sigs.size() == trees.size());
    }
    CHECK_THROWS_AS(enumerate_crps(11), resource_limit);
}

TEST_CASE("haar_vector values") {
    const HaarVector balanced = haar_vector({0, 4}, 2);
    CHECK(balanced.norm_const == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(balanced(0) == doctest::Approx(-0.5));
    CHECK(balanced(1) == doctest::Approx(-0.5));
    CHECK(balanced(2) == doctest::Approx(0.5));
    CHECK(balanced(3) == doctest::Approx(0.5));

    const HaarVector skew = haar_vector({0, 3}, 1);
    CHECK(skew.norm_const == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
    CHECK(skew(0) == doctest::Approx(-0.816496580927726).epsilon(1e-12));
    CHECK(skew(1) == doctest::Approx(0.408248290463863).epsilon(1e-12));
    CHECK(skew(2) == doctest::Approx(0.408248290463863).epsilon(1e-12));

    CHECK_THROWS_AS(haar_vector({0, 3}, 0), invalid_split);
    CHECK_THROWS_AS(haar_vector({0, 3}, 3), invalid_split);
}

TEST_CASE("haar vectors: unit norm, zero mean, orthogonal within a tree") {
    Rng rng(20240517);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 15);
        const PartitionTree tree = random_crp(n, rng);
        std::vector<HaarVector> basis;
        for (int id : tree.internal_ids()) {
            const TreeNode& nd = tree.node(id);
            basis.push_back(haar_vector(nd.cell, nd.split));
        }
        for (const auto& h : basis) {
            double sum = 0.0, sq = 0.0;
            for (int i = 0; i < n; ++i) {
                sum += h(i);
                sq += h(i) * h(i);
            }
            CHECK(std::abs(sum) < 1e-12);
            CHECK(std::abs(sq - 1.0) < 1e-12);
        }
        for (std::size_t a = 0; a < basis.size(); ++a) {
            for (std::size_t b = a + 1; b < basis.size(); ++b) {
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += basis[a](i) * basis[b](i);
                CHECK(std::abs(dot) < 1e-12);
            }
        }
    }
}

TEST_CASE("haar_coefficient") {
    const std::vector<double> ones = {1, 1, 1, 1};
    CHECK(haar_coefficient(ones, haar_vector({0, 4}, 2)) == doctest::Approx(0.0));
    const std::vector<double> step = {0, 0, 10, 10};
    CHECK(haar_coefficient(step, haar_vector({0, 4}, 2)) == doctest::Approx(10.0));
    const std::vector<double> pair = {1, 3};
    CHECK(haar_coefficient(pair, haar_vector({0, 2}, 1)) == doctest::Approx(std::sqrt(2.0)));

    // Matches the literal dot product on random data.
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 3 + static_cast<int>(rng.next_u64() % 10);
        std::vector<double> x(static_cast<std::size_t>(n));
        for (auto& v : x) v = rng.gaussian(0.0, 2.0);
        const PartitionTree tree = random_crp(n, rng);
        for (int id : tree.internal_ids()) {
            const TreeNode& nd = tree.node(id);
            const HaarVector h = haar_vector(nd.cell, nd.split);
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += x[static_cast<std::size_t>(i)] * h(i);
            CHECK(haar_coefficient(x, h) == doctest::Approx(dot).epsilon(1e-12));
        }
    }

    const std::vector<double> shrt = {1.0};
    CHECK_THROWS_AS(haar_coefficient(shrt, haar_vector({0, 2}, 1)), invalid_argument);
}

TEST_CASE("sum_pyramid") {
    const std::vector<double> x = {1, 2, 3, 4};
    const PartitionTree tree = dyadic_crp(4);
    const SumPyramid p = sum_pyramid(x, tree);
    CHECK(p.value(Interval{0, 4}) == doctest::Approx(10.0));
    CHECK(p.value(Interval{0, 2}) == doctest::Approx(3.0));
    CHECK(p.value(Interval{2, 4}) == doctest::Approx(7.0));

    const std::vector<double> zeros(8, 0.0);
    const SumPyramid pz = sum_pyramid(zeros, dyadic_crp(8));
    for (int id = 0; id < pz.tree().size(); ++id) CHECK(pz.value(id) == 0.0);

    // Parent sums equal child sums on random counts, exactly.
    Rng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 12);
        std::vector<double> counts(static_cast<std::size_t>(n));
        for (auto& v : counts) v = static_cast<double>(rng.poisson(5.0));
        const PartitionTree t = random_crp(n, rng);
        const SumPyramid sp = sum_pyramid(counts, t);
        for (int id : t.internal_ids()) {
            const TreeNode& nd = t.node(id);
            CHECK(sp.value(id) == sp.value(nd.left) + sp.value(nd.right));
        }
    }

    const std::vector<double> wrong = {1, 2, 3};
    CHECK_THROWS_AS(sum_pyramid(wrong, tree), invalid_argument);
}

TEST_CASE("is_refinement") {
    const PartitionTree trivial = crp_from_splits(4, {});
    const PartitionTree dy = dyadic_crp(4);
    CHECK(is_refinement(trivial, dy));
    CHECK(is_refinement(dy, dy));

    const std::vector<std::pair<Interval, int>> left_first = {{{0, 4}, 2}};
    const std::vector<std::pair<Interval, int>> cross = {{{0, 4}, 1}};
    CHECK_FALSE(is_refinement(crp_from_splits(4, left_first), crp_from_splits(4, cross)));

    const PartitionTree other_root = crp_from_splits(5, {});
    CHECK_THROWS_AS(is_refinement(trivial, other_root), invalid_argument);
}

TEST_CASE("is_refinement is a partial order on all partial trees, n <= 5") {
    for (int n = 2; n <= 5; ++n) {
        std::vector<PartitionTree> trees;
        for (const auto& splits : partial_split_lists({0, n})) {
            trees.push_back(crp_from_splits(n, splits));
        }
        for (const auto& a : trees) CHECK(is_refinement(a, a));
        for (std::size_t i = 0; i < trees.size(); ++i) {
            for (std::size_t j = 0; j < trees.size(); ++j) {
                const bool ij = is_refinement(trees[i], trees[j]);
                if (i != j && ij) {
                    // antisymmetry
                    const bool ji = is_refinement(trees[j], trees[i]);
                    CHECK((!ji || tree_signature(trees[i]) == tree_signature(trees[j])));
                    // transitivity
                    for (std::size_t k = 0; k < trees.size(); ++k) {
                        if (is_refinement(trees[j], trees[k])) CHECK(is_refinement(trees[i], trees[k]));
                    }
                }
            }
        }
    }
}

TEST_CASE("deep left-comb trees are safe to build and traverse") {
    const PartitionTree comb = left_comb_crp(200000);
    CHECK(comb.complete());
    CHECK(comb.leaf_cells().size() == 200000);
    CHECK(comb.find(Interval{199999, 200000}) >= 0);
}
