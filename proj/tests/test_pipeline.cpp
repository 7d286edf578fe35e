#include "doctest.h"

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "toolwatch/pipeline.hpp"

using namespace toolwatch;
using pipeline::PipelineConfig;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

PipelineConfig small_config(const std::filesystem::path& dir) {
    auto c = pipeline::parse_config(R"(
        out = out
        window_length = 256
        stride = 256
        synth.windows_per_class = 30
        synth.window_length = 256
        synth.class0 = 100, 5, 0.0, 0.3
        synth.class1 = 100, 6, 0.5, 0.3
        synth.class2 = 100, 7, 1.0, 0.3
        grid.n_neighbors = 1, 3, 5
        grid.metrics = manhattan, euclidean
        importance.repeats = 3
        lime.samples = 200
    )", dir);
    return c;
}

}  // namespace

TEST_SUITE("pipeline") {
TEST_CASE("config parsing") {
    const auto c = pipeline::parse_config("seed = 9 # trailing\n\nselect_k=4\ngrid.weightings = distance\nsynth.class1 = 1,2,0.1,0.2\n",
                                          "/base");
    CHECK(c.seed == 9);
    CHECK(c.select_k == 4);
    CHECK(c.grid.weightings == std::vector<knn::Weighting>{knn::Weighting::inverse_distance});
    CHECK(c.synth.classes[1].stddev == 2.0);
    CHECK(c.out_dir == "out");
    CHECK(pipeline::parse_config("out = res", "/base").out_dir == "/base/res");
    CHECK_THROWS_WITH_AS(pipeline::parse_config("bogus = 1"), doctest::Contains("unknown key 'bogus'"), Error);
    CHECK_THROWS_AS(pipeline::parse_config("seed = -1"), Error);
    CHECK_THROWS_AS(pipeline::parse_config("seed"), Error);
    CHECK_THROWS_AS(pipeline::parse_config("synth.class0 = 1,2"), Error);
    CHECK_THROWS_AS(pipeline::load_config("/nonexistent/x.conf"), Error);
}

TEST_CASE("instances") {
    const auto m = pipeline::parse_instance("mean=1.5, median = 2");
    CHECK(m.at("mean") == 1.5);
    CHECK(m.at("median") == 2.0);
    CHECK_THROWS_AS(pipeline::parse_instance("mean"), Error);
    CHECK_THROWS_AS(pipeline::parse_instance("mean=abc"), Error);
}

TEST_CASE("commands run end to end and are deterministic") {
    const auto dir = fixture::temp_dir("pipe");
    auto c = small_config(dir);
    const auto out = c.out_dir;
    pipeline::cmd_synth(c);
    const auto ing = pipeline::cmd_ingest(c);
    CHECK(ing.files == 3);
    // outlier removal shortens the skewed signals, so a window can go missing
    CHECK(ing.rows == ing.windows);
    CHECK(ing.rows <= 90);
    CHECK(ing.rows >= 85);
    CHECK(line_count(out / "features.csv") == ing.rows + 1);
    CHECK(slurp(out / "features.csv").starts_with("mean,median,kurtosis,skewness,standard_error,variance,maximum,minimum,range,summation,standard_deviation,mode,label"));
    const auto first = slurp(out / "features.csv");
    pipeline::cmd_ingest(c);
    CHECK(slurp(out / "features.csv") == first);

    const auto vanilla = pipeline::cmd_train(c, pipeline::TrainMode::vanilla);
    CHECK(vanilla.hyperparameters == knn::vanilla_hyperparameters());
    CHECK_FALSE(std::filesystem::exists(out / "grid_results.csv"));
    CHECK(vanilla.selected_features.size() == 10);

    c.test_fraction = 0.1;
    const auto tuned = pipeline::cmd_train(c, pipeline::TrainMode::tuned);
    REQUIRE(tuned.grid);
    CHECK(tuned.grid->rows.size() == 12);
    CHECK(line_count(out / "grid_results.csv") == 13);
    REQUIRE(tuned.test_matrix);
    CHECK(tuned.test_matrix->total() == 9);
    CHECK(std::filesystem::exists(out / "confusion_test.txt"));
    CHECK(std::filesystem::exists(out / "selection_tree.dot"));

    const auto global = pipeline::cmd_explain(c, {});
    REQUIRE(global.global);
    CHECK(global.global->entries.size() == 10);
    CHECK(line_count(out / "global_importance.csv") == 11);
    CHECK(std::filesystem::exists(out / "scatter.svg"));
    CHECK(std::filesystem::exists(out / "explain_tree.dot"));

    const auto model = knn::KnnModel::load(c.model_file());
    const auto row = model.training_table()[3];
    std::map<std::string, double> inst;
    for (std::size_t j = 0; j < model.dimension(); ++j) inst[model.feature_names()[j]] = row.values[j];
    const auto local = pipeline::cmd_explain(c, inst);
    REQUIRE(local.prediction);
    CHECK(local.prediction->label == *row.label);
    CHECK(local.local->coefficients[0].size() == 10);
    CHECK(std::filesystem::exists(out / "local_explanation.svg"));

    c.sweep_hp = {1, knn::Metric::euclidean(), knn::Weighting::inverse_distance};
    const auto sweep = pipeline::cmd_sweep(c);
    CHECK(sweep.split_rows.size() == 5);
    CHECK(sweep.kfold_rows.size() == 6);
    for (const auto& r : sweep.split_rows) CHECK(r.train_accuracy == 1.0);
    CHECK(line_count(out / "sweep_kfold.csv") == 7);
    std::filesystem::remove_all(dir);
}

TEST_CASE("failures name the culprit and leave no partial output") {
    const auto dir = fixture::temp_dir("fail");
    auto c = small_config(dir);
    pipeline::cmd_synth(c);
    std::ofstream(c.out_dir / "signals" / "class_1.csv", std::ios::app) << "not-a-number\n";
    try {
        pipeline::cmd_ingest(c);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("class_1.csv") != std::string::npos);
    }
    CHECK_FALSE(std::filesystem::exists(c.out_dir / "features.csv"));

    c.model_path = dir / "none.json";
    CHECK_THROWS_WITH_AS(pipeline::cmd_explain(c, {}), doctest::Contains("none.json"), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("instance vectors follow the model order") {
    const auto t = fixture::dominant_table(5, 3, 1);
    const auto m = knn::fit(t, {1, knn::Metric::euclidean(), knn::Weighting::uniform});
    const auto x = pipeline::instance_vector(m, {{"kurtosis", 3}, {"mean", 1}, {"median", 2}, {"mode", 9}});
    CHECK(x == std::vector<double>{1, 2, 3});
    CHECK_THROWS_WITH_AS(pipeline::instance_vector(m, {{"mean", 1}, {"median", 2}}), doctest::Contains("kurtosis"), Error);
    CHECK_THROWS_WITH_AS(pipeline::instance_vector(m, {{"mean", 1}, {"median", 2}, {"kurtosis", 3}, {"speed", 1}}),
                         doctest::Contains("speed"), Error);
}
}
