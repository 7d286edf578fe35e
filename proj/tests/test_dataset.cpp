#include "doctest.h"

#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "toolwatch/dataset.hpp"
#include "toolwatch/features.hpp"

using namespace toolwatch;
using namespace toolwatch::dataset;

namespace {

GeneratorConfig small_generator() {
    GeneratorConfig g;
    g.classes[0] = {100, 5, 0.0, 0.3};
    g.classes[1] = {100, 6, 0.5, 0.3};
    g.classes[2] = {100, 7, 1.0, 0.3};
    g.windows_per_class = 20;
    g.window_length = 512;
    g.rng_seed = 3;
    return g;
}

}  // namespace

TEST_SUITE("dataset") {
TEST_CASE("signal files round trip and report line numbers") {
    const auto dir = fixture::temp_dir("sig");
    SignalSeries s;
    s.samples = {1.5, -2.25, 1e-9, 3.0 / 7.0};
    s.label = ToolCondition::InitialWear;
    save_signal(s, dir / "a.csv");
    const auto back = load_signal(dir / "a.csv", Direction::X);
    CHECK(back.samples == s.samples);

    std::ofstream(dir / "bad.csv") << "# header\n1.0\n\n2.0\nabc\n";
    try {
        load_signal(dir / "bad.csv", Direction::X);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("bad.csv:5") != std::string::npos);
    }
    std::ofstream(dir / "empty.csv") << "# nothing\n";
    CHECK_THROWS_AS(load_signal(dir / "empty.csv", Direction::X), Error);
    CHECK_THROWS_AS(load_signal(dir / "missing.csv", Direction::X), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("manifest paths resolve against the manifest directory") {
    const auto dir = fixture::temp_dir("man");
    std::filesystem::create_directories(dir / "sub");
    std::vector<ManifestEntry> entries = {{"sub/x.csv", Direction::X, ToolCondition::ProgressedWear}};
    save_manifest(entries, dir / "manifest.csv");
    const auto back = load_manifest(dir / "manifest.csv");
    REQUIRE(back.size() == 1);
    CHECK(back[0].path == dir / "sub/x.csv");
    CHECK(back[0].label == ToolCondition::ProgressedWear);
    std::ofstream(dir / "broken.csv") << "a.csv,Z,0\n";
    CHECK_THROWS_AS(load_manifest(dir / "broken.csv"), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("outlier filter removes far points only") {
    SignalSeries s;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0, 1);
    for (int i = 0; i < 5000; ++i) s.samples.push_back(g(rng));
    s.samples[100] = 50.0;
    s.samples[2000] = -60.0;
    const auto r = remove_outliers(s, 4.0);
    CHECK(r.series.samples.size() + r.removed_count == s.samples.size());
    CHECK(r.removed_count >= 2);
    CHECK(r.removed_count <= 4);
    for (double v : r.series.samples) CHECK(std::abs(v) < 10.0);
    CHECK(remove_outliers(s, 1e9).removed_count == 0);
    CHECK_THROWS_AS(remove_outliers(s, 0.0), Error);
}

TEST_CASE("windows tile the series") {
    SignalSeries s;
    s.label = ToolCondition::GoodCondition;
    for (int i = 0; i < 100; ++i) s.samples.push_back(i);
    const auto w = make_windows(s, 30, 30);
    REQUIRE(w.size() == 3);
    CHECK(w[2].samples.front() == 60);
    CHECK(make_windows(s, 30, 10).size() == 8);
    CHECK_THROWS_AS(make_windows(s, 3, 3), Error);
    s.label.reset();
    CHECK_THROWS_AS(make_windows(s, 30, 30), Error);
}

TEST_CASE("augment keeps originals and class proportions") {
    std::vector<Window> ws;
    for (int i = 0; i < 10; ++i) ws.push_back({std::vector<double>(16, i), "a", ToolCondition::GoodCondition});
    for (int i = 0; i < 7; ++i) ws.push_back({std::vector<double>(16, i), "b", ToolCondition::InitialWear});
    for (int i = 0; i < 3; ++i) ws.push_back({std::vector<double>(16, i), "c", ToolCondition::ProgressedWear});
    const auto out = augment(ws, 41, 9);
    REQUIRE(out.size() == 41);
    for (std::size_t i = 0; i < ws.size(); ++i) CHECK(out[i].samples == ws[i].samples);
    std::array<double, 3> counts{};
    for (const auto& w : out) counts[severity(w.label)] += 1;
    CHECK(std::abs(counts[0] - 41.0 * 10 / 20) <= 1.0);
    CHECK(std::abs(counts[1] - 41.0 * 7 / 20) <= 1.0);
    CHECK(std::abs(counts[2] - 41.0 * 3 / 20) <= 1.0);
    const auto again = augment(ws, 41, 9);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(again[i].samples == out[i].samples);
    CHECK_THROWS_AS(augment(ws, 5, 9), Error);
}

TEST_CASE("generator is deterministic and class-distinct") {
    const auto g = small_generator();
    const auto a = synthesize(g);
    const auto b = synthesize(g);
    REQUIRE(a.size() == 60);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].samples == b[i].samples);

    std::array<double, 3> skew{};
    for (const auto& s : a) skew[severity(*s.label)] += features::extract(s.samples)[features::Feature::skewness] / 20.0;
    CHECK(skew[0] < skew[1]);
    CHECK(skew[1] < skew[2]);

    auto same = g;
    same.classes[1] = same.classes[0];
    CHECK_THROWS_AS(synthesize(same), Error);
    same.allow_identical_classes = true;
    CHECK_NOTHROW(synthesize(same));
    auto bad = g;
    bad.classes[0].ar_coefficient = 1.0;
    CHECK_THROWS_AS(synthesize(bad), Error);
    bad = g;
    bad.sessions_per_class = 0;
    CHECK_THROWS_AS(synthesize(bad), Error);
}

TEST_CASE("sessions give each run its own level") {
    auto g = small_generator();
    g.sessions_per_class = 4;
    g.session_mean_spread = 20.0;
    const auto s = synthesize(g);
    // Windows 0..4 form run 0, 5..9 run 1 of class 0.
    auto level = [&](std::size_t i) { return features::extract(s[i].samples)[features::Feature::mean]; };
    const double within = std::abs(level(0) - level(1));
    double across = 0.0;
    for (std::size_t r = 1; r < 4; ++r) across = std::max(across, std::abs(level(0) - level(5 * r)));
    CHECK(within < across);
    CHECK(s[6].source_id.find("run1") != std::string::npos);
}
}
