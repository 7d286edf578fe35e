// Shared test data: random tables, the dominant-feature table, the published matrices.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "toolwatch/evaltune.hpp"
#include "toolwatch/features.hpp"

namespace fixture {

using toolwatch::ToolCondition;
using toolwatch::features::FeatureTable;
using Counts = std::array<std::array<std::size_t, 3>, 3>;

inline std::vector<std::string> names(std::size_t d) {
    auto all = toolwatch::features::canonical_names();
    all.resize(d);
    return all;
}

/// Uniform random features in [-1, 1), random labels.
inline FeatureTable random_table(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> lab(0, 2);
    FeatureTable t(names(d));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(d);
        for (auto& e : v) e = u(rng);
        t.add_row(v, static_cast<ToolCondition>(lab(rng)));
    }
    return t;
}

/// Small integer coordinates: exact distance ties are common.
inline FeatureTable integer_table(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> u(0, 3);
    std::uniform_int_distribution<int> lab(0, 2);
    FeatureTable t(names(d));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(d);
        for (auto& e : v) e = u(rng);
        t.add_row(v, static_cast<ToolCondition>(lab(rng)));
    }
    return t;
}

/// Column 0 carries the class (centers 0, 1, 2 with small noise); the rest are noise at
/// a much smaller scale, so an unstandardized model is driven by column 0 alone.
inline FeatureTable dominant_table(std::size_t per_class, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    FeatureTable t(names(d));
    for (std::size_t i = 0; i < per_class; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            std::vector<double> v(d);
            v[0] = static_cast<double>(c) + 0.08 * g(rng);
            for (std::size_t j = 1; j < d; ++j) v[j] = 0.01 * g(rng);
            t.add_row(v, static_cast<ToolCondition>(c));
        }
    }
    return t;
}

struct PublishedMatrix {
    const char* name;
    Counts counts;
    double accuracy_pct;  // printed summary cell
};

// Rows are actual classes, columns predicted.
inline const std::array<PublishedMatrix, 5> kPublishedMatrices = {{
    {"raw X train", {{{866, 24, 18}, {50, 831, 28}, {42, 23, 844}}}, 93.21},
    {"augmented X train", {{{1766, 30, 12}, {4, 1694, 111}, {4, 53, 1752}}}, 96.06},
    {"raw Y train", {{{696, 116, 96}, {202, 514, 193}, {99, 208, 602}}}, 66.47},
    {"tuned test", {{{184, 2, 1}, {0, 164, 6}, {0, 9, 177}}}, 96.69},
    {"tuned train", {{{1603, 11, 7}, {3, 1600, 36}, {3, 50, 1570}}}, 97.75},
}};

inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    auto p = std::filesystem::temp_directory_path() / ("toolwatch_" + tag + "_" + std::to_string(rng() % 1000000000));
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace fixture
