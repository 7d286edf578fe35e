#include "doctest.h"

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "toolwatch/dtree.hpp"

using namespace toolwatch;

TEST_SUITE("dtree") {
TEST_CASE("gini") {
    CHECK(dtree::gini({0, 0, 0}) == 0.0);
    CHECK(dtree::gini({5, 0, 0}) == 0.0);
    CHECK(dtree::gini({1, 1, 1}) == doctest::Approx(2.0 / 3.0));
    CHECK(dtree::gini({2, 2, 0}) == doctest::Approx(0.5));
}

TEST_CASE("root split equals the exhaustive search") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 40; ++t) {
        const std::size_t n = 20 + rng() % 120, d = 1 + rng() % 6;
        const auto table = (t % 2) ? fixture::integer_table(n, d, rng) : fixture::random_table(n, d, rng);
        const auto want = oracle::exhaustive_root(oracle::rows_of(table), table.labels());
        const auto tree = dtree::fit_tree(table, {8, 2, 0});
        REQUIRE(want.found == !tree.root->is_leaf());
        if (want.found) {
            CHECK(tree.root->split_feature == want.feature);
            CHECK(tree.root->split_threshold == want.threshold);
        }
    }
}

TEST_CASE("stopping rules") {
    features::FeatureTable pure(fixture::names(1));
    for (int i = 0; i < 20; ++i) pure.add_row({double(i)}, ToolCondition::InitialWear);
    CHECK(dtree::fit_tree(pure).node_count() == 1);

    std::mt19937_64 rng(22);
    const auto t = fixture::random_table(200, 4, rng);
    CHECK(dtree::fit_tree(t, {3, 2, 0}).depth() <= 3);
    CHECK(dtree::fit_tree(t, {8, 500, 0}).node_count() == 1);
    const auto ranking = dtree::feature_importance(dtree::fit_tree(t, {8, 500, 0}), t);
    CHECK_FALSE(ranking.has_split);
    for (const auto& [name, v] : ranking.entries) CHECK(v == 0.0);
}

TEST_CASE("importance finds the informative column") {
    const auto t = fixture::dominant_table(60, 5, 4);
    const auto tree = dtree::fit_tree(t);
    const auto r = dtree::feature_importance(tree, t);
    REQUIRE(r.has_split);
    CHECK(r.entries.front().first == "mean");
    double total = 0;
    for (const auto& [name, v] : r.entries) total += v;
    CHECK(total == doctest::Approx(1.0));
    for (std::size_t i = 1; i < r.entries.size(); ++i) CHECK(r.entries[i - 1].second >= r.entries[i].second);
    // Perfectly separable: training predictions are exact.
    for (const auto& row : t.rows()) CHECK(tree.predict(row.values) == row.label);
}

TEST_CASE("top-k comes back in column order") {
    dtree::ImportanceRanking r;
    r.entries = {{"variance", 0.5}, {"mean", 0.3}, {"kurtosis", 0.2}, {"median", 0.0}};
    const std::vector<std::string> cols = {"mean", "median", "kurtosis", "variance"};
    CHECK(dtree::select_top_k(r, 2, cols) == std::vector<std::string>{"mean", "variance"});
    CHECK_THROWS_AS(dtree::select_top_k(r, 0, cols), Error);
}

TEST_CASE("dot export lists every node") {
    const auto t = fixture::dominant_table(20, 3, 5);
    const auto tree = dtree::fit_tree(t);
    const auto dot = dtree::export_dot(tree);
    CHECK(dot.find("digraph") != std::string::npos);
    CHECK(dot.find("mean <= ") != std::string::npos);
    CHECK(dot.find("samples = 60") != std::string::npos);
    CHECK(dot.find("n" + std::to_string(tree.node_count() - 1) + " [") != std::string::npos);
}
}
