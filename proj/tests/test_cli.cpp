#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(TOOLWATCH_EXE) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path small_config(const fs::path& dir) {
    std::ofstream c(dir / "small.conf");
    c << "window_length = 256\nstride = 256\n"
         "synth.windows_per_class = 20\nsynth.window_length = 256\n"
         "grid.n_neighbors = 1, 3, 5\ngrid.metrics = manhattan, euclidean\n";
    return dir / "small.conf";
}

std::string all_steps(const fs::path& conf, const fs::path& out) {
    const std::string base = "--config " + conf.string() + " --out " + out.string() + " ";
    for (const char* step : {"synth", "ingest", "train --mode tuned --split 0.2", "explain", "explain --row 3", "sweep"}) {
        if (run(base + step) != 0) return step;
    }
    return "";
}

}  // namespace

TEST_SUITE("cli") {
TEST_CASE("all subcommands succeed and reruns are byte identical") {
    const auto dir = fixture::temp_dir("cli");
    const auto conf = small_config(dir);
    CHECK(all_steps(conf, dir / "a") == "");
    CHECK(all_steps(conf, dir / "b") == "");
    for (const char* f : {"manifest.csv", "features.csv", "model.json", "metrics.json", "grid_results.csv",
                          "global_importance.csv", "local_explanation.json", "sweep_split.csv", "sweep_kfold.csv"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(dir / "a" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    fs::remove_all(dir);
}

TEST_CASE("failures exit nonzero and leave no partial outputs") {
    const auto dir = fixture::temp_dir("clifail");
    const auto conf = small_config(dir);
    const std::string base = "--config " + conf.string() + " --out " + (dir / "o").string() + " ";
    CHECK(run("") != 0);
    CHECK(run("frobnicate") != 0);
    CHECK(run(base + "train --mode sometimes") != 0);
    CHECK(run(base + "train") == 1);
    CHECK_FALSE(fs::exists(dir / "o" / "model.json"));
    CHECK_FALSE(fs::exists(dir / "o" / "metrics.json"));

    REQUIRE(run(base + "synth") == 0);
    {
        std::ofstream bad(dir / "o" / "signals" / "class_1.csv", std::ios::app);
        bad << "12.5,not-a-number\n";
    }
    CHECK(run(base + "ingest") == 1);
    CHECK_FALSE(fs::exists(dir / "o" / "features.csv"));
    CHECK(run(base + "explain --model " + (dir / "none.json").string()) == 1);
    fs::remove_all(dir);
}
}
