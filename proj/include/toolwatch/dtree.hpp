#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "toolwatch/common.hpp"
#include "toolwatch/features.hpp"

namespace toolwatch::dtree {

inline constexpr std::size_t kDefaultMaxDepth = 8;
inline constexpr std::size_t kDefaultMinSamplesSplit = 10;

using ClassHistogram = std::array<std::size_t, kNumClasses>;

/// Gini impurity 1 - sum(p_i^2). Zero for an empty histogram.
double gini(const ClassHistogram& histogram);

struct TreeNode {
    double gini = 0.0;
    std::size_t sample_count = 0;
    ClassHistogram class_histogram{};
    ToolCondition predicted_label = ToolCondition::GoodCondition;

    // Set on internal nodes only.
    std::size_t split_feature = 0;
    double split_threshold = 0.0;
    std::unique_ptr<TreeNode> left;   // feature <= threshold
    std::unique_ptr<TreeNode> right;  // feature > threshold

    bool is_leaf() const { return !left; }
};

/// A fitted tree together with the column names it was trained on.
struct DecisionTree {
    std::vector<std::string> feature_names;
    std::unique_ptr<TreeNode> root;

    std::size_t node_count() const;
    std::size_t depth() const;
    ToolCondition predict(std::span<const double> row) const;
};

struct SplitCandidate {
    std::size_t feature = 0;
    double threshold = 0.0;
    double impurity_decrease = 0.0;
};

/// Best Gini split over all features and midpoints of consecutive distinct values.
/// Ties: lowest feature index, then lowest threshold. Returns nullopt when no split
/// reduces impurity.
std::optional<SplitCandidate> best_split(const features::FeatureTable& table,
                                         std::span<const std::size_t> rows);

struct TreeOptions {
    std::size_t max_depth = kDefaultMaxDepth;
    std::size_t min_samples_split = kDefaultMinSamplesSplit;
    /// Accepted for interface symmetry; the exhaustive search has no random component.
    std::uint64_t rng_seed = 0;
};

DecisionTree fit_tree(const features::FeatureTable& table, const TreeOptions& options = {});

struct ImportanceRanking {
    /// Descending by importance; ties keep canonical (column) order.
    std::vector<std::pair<std::string, double>> entries;
    /// False when the tree has no split; importances are then all zero.
    bool has_split = false;
};

ImportanceRanking feature_importance(const DecisionTree& tree,
                                     const features::FeatureTable& table);

/// The k highest-ranked names, returned in the table's column order.
std::vector<std::string> select_top_k(const ImportanceRanking& ranking, std::size_t k,
                                      std::span<const std::string> column_order);

std::string export_dot(const DecisionTree& tree);

void save_ranking_csv(const ImportanceRanking& ranking, const std::filesystem::path& path);

}  // namespace toolwatch::dtree
