#include "doctest.h"

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "toolwatch/explain.hpp"
#include "toolwatch/svg.hpp"

using namespace toolwatch;
using knn::Metric;
using knn::Weighting;

namespace {

features::FeatureTable with_constant_column(const features::FeatureTable& t) {
    auto names = t.feature_names();
    names.push_back("mode");
    features::FeatureTable out(names);
    for (const auto& r : t.rows()) {
        auto v = r.values;
        v.push_back(2.5);
        out.add_row(v, r.label);
    }
    return out;
}

}  // namespace

TEST_SUITE("explain") {
TEST_CASE("permutation importance: constant column is exactly zero") {
    const auto t = with_constant_column(fixture::dominant_table(30, 3, 1));
    const auto model = knn::fit(t, {3, Metric::euclidean(), Weighting::uniform}, false);
    const auto g = explain::permutation_importance(model, t, 5, 2);
    bool seen = false;
    for (const auto& e : g.entries) {
        if (e.feature == "mode") {
            seen = true;
            CHECK(e.mean == 0.0);
            CHECK(e.stddev == 0.0);
        }
    }
    CHECK(seen);
    CHECK(g.entries.front().feature == "mean");
    CHECK_THROWS_AS(explain::permutation_importance(model, t, 1, 2), Error);
}

TEST_CASE("permutation importance: serial equals parallel") {
    std::mt19937_64 rng(2);
    const auto t = fixture::random_table(150, 6, rng);
    const auto model = knn::fit(t, {5, Metric::manhattan(), Weighting::inverse_distance});
    const auto a = explain::permutation_importance(model, t, 6, 9, Execution::serial);
    const auto b = explain::permutation_importance(model, t, 6, 9, Execution::parallel);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].feature == b.entries[i].feature);
        CHECK(a.entries[i].mean == b.entries[i].mean);
        CHECK(a.entries[i].stddev == b.entries[i].stddev);
    }
    for (std::size_t i = 1; i < a.entries.size(); ++i) CHECK(a.entries[i - 1].mean >= a.entries[i].mean);
    const auto text = explain::render_global_text(a);
    CHECK(text.find(" ± ") != std::string::npos);
    CHECK(text.find("| " + a.entries.front().feature) != std::string::npos);
}

TEST_CASE("lime: constant scorer gives zero coefficients") {
    const std::vector<std::string> names = {"mean", "median", "kurtosis"};
    const std::vector<double> x = {1, 2, 3}, sd = {1, 1, 1};
    const explain::ScoreFunction flat = [](std::span<const double>) { return std::array<double, 3>{0.2, 0.3, 0.5}; };
    const auto e = explain::lime_explain(flat, names, x, sd, ToolCondition::ProgressedWear, 300, 1.0, 4);
    for (const auto& cls : e.coefficients) {
        for (double c : cls) CHECK(std::abs(c) < 1e-6);
    }
    CHECK(e.intercepts[2] == doctest::Approx(0.5));
}

TEST_CASE("lime: linear scorer is recovered") {
    const std::vector<std::string> names = {"mean", "median"};
    const std::vector<double> x = {0, 0}, sd = {2, 1};
    // Share of class 0 rises with feature 0 (per unit of std: 0.1 * 2).
    const explain::ScoreFunction lin = [](std::span<const double> v) {
        const double s = 0.5 + 0.1 * v[0] - 0.05 * v[1];
        return std::array<double, 3>{s, 1 - s, 0};
    };
    const auto e = explain::lime_explain(lin, names, x, sd, ToolCondition::GoodCondition, 2000, 5.0, 5);
    CHECK(e.coefficients[0][0] == doctest::Approx(0.2).epsilon(1e-3));
    CHECK(e.coefficients[0][1] == doctest::Approx(-0.05).epsilon(1e-3));
    CHECK(e.r_squared[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("lime on a model is seeded and bounded") {
    const auto t = fixture::dominant_table(30, 4, 3);
    const auto model = knn::fit(t, {4, Metric::manhattan(), Weighting::inverse_distance}, false);
    const auto x = t[0].values;
    const auto a = explain::lime_explain(model, x, 400, explain::default_kernel_width(4), 11);
    const auto b = explain::lime_explain(model, x, 400, explain::default_kernel_width(4), 11);
    CHECK(a.coefficients == b.coefficients);
    for (double r2 : a.r_squared) {
        CHECK(r2 >= 0.0);
        CHECK(r2 <= 1.0);
    }
    CHECK(a.predicted_label == ToolCondition::GoodCondition);
    CHECK(explain::local_to_json(a)["classes"].size() == 3);
    CHECK_THROWS_AS(explain::lime_explain(model, x, 400, 1e-9, 11), Error);
    CHECK_THROWS_AS(explain::lime_explain(model, std::vector<double>{1}, 400, 1.0, 11), Error);
}

TEST_CASE("pca matches power iteration") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0, 1);
    for (int t = 0; t < 10; ++t) {
        const std::size_t d = 3 + t % 5;
        features::FeatureTable table(fixture::names(d));
        std::vector<double> mix(d * d);
        for (auto& m : mix) m = g(rng);
        for (int i = 0; i < 80; ++i) {
            std::vector<double> z(d), v(d, 0.0);
            for (std::size_t a = 0; a < d; ++a) z[a] = g(rng) * (1.0 + static_cast<double>(a));
            for (std::size_t a = 0; a < d; ++a) {
                for (std::size_t b = 0; b < d; ++b) v[a] += mix[a * d + b] * z[b];
            }
            table.add_row(v, ToolCondition::GoodCondition);
        }
        const auto p = explain::pca_project(table);
        const auto o = oracle::power_pca(oracle::rows_of(table));
        for (int c = 0; c < 2; ++c) {
            for (std::size_t a = 0; a < d; ++a) CHECK(p.components[c][a] == doctest::Approx(o.vectors[c][a]).epsilon(1e-6));
            CHECK(p.explained_variance[c] == doctest::Approx(o.values[c] / o.trace).epsilon(1e-9));
        }
    }
}

TEST_CASE("pca edge cases") {
    features::FeatureTable planar(fixture::names(3));
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0, 1);
    for (int i = 0; i < 40; ++i) {
        const double u = g(rng), v = g(rng);
        planar.add_row({u, v, 2 * u - 3 * v}, ToolCondition::GoodCondition);
    }
    const auto p = explain::pca_project(planar);
    CHECK(p.explained_variance[0] + p.explained_variance[1] == doctest::Approx(1.0).epsilon(1e-9));

    features::FeatureTable line(fixture::names(2));
    for (int i = 0; i < 10; ++i) line.add_row({double(i), 2.0 * i}, ToolCondition::GoodCondition);
    CHECK_THROWS_AS(explain::pca_project(line), Error);
}

TEST_CASE("neighbor plot data follows the model") {
    std::mt19937_64 rng(8);
    const auto t = fixture::random_table(60, 4, rng);
    const auto model = knn::fit(t, {3, Metric::euclidean(), Weighting::uniform});
    const auto proj = explain::pca_project(model.training_table());
    std::vector<std::vector<double>> q = {t[0].values, t[5].values};
    const auto data = explain::neighbor_plot_data(model, q, proj);
    CHECK(data.training_points.size() == 60);
    CHECK(data.segments.size() == 6);
    CHECK(data.segments.front().training_index == 0);
    const auto svg = svg::neighbor_scatter(data, "scatter");
    std::size_t segs = 0;
    for (auto pos = svg.find("class=\"segment\""); pos != std::string::npos; pos = svg.find("class=\"segment\"", pos + 1)) ++segs;
    CHECK(segs == 6);
}

TEST_CASE("bar chart color follows the sign") {
    const auto svg = svg::signed_bar_chart({"mean", "median", "mode"}, {0.3, -0.1, 0.0}, "local");
    CHECK(svg.find("class=\"bar positive\" data-feature=\"mean\"") != std::string::npos);
    CHECK(svg.find("class=\"bar negative\" data-feature=\"median\"") != std::string::npos);
    CHECK(svg.find("class=\"bar positive\" data-feature=\"mode\"") != std::string::npos);
    CHECK_THROWS_AS(svg::signed_bar_chart({"a"}, {}, "x"), Error);
}
}
