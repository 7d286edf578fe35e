#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "toolwatch/common.hpp"
#include "toolwatch/features.hpp"
#include "toolwatch/knn.hpp"

namespace toolwatch::explain {

inline constexpr std::size_t kDefaultRepeats = 10;
inline constexpr std::size_t kDefaultLimeSamples = 500;
inline constexpr double kLimeRidge = 1e-3;

struct FeatureImportance {
    std::string feature;
    double mean = 0.0;
    double stddev = 0.0;
};

struct GlobalExplanation {
    double baseline_accuracy = 0.0;
    std::size_t repeats = 0;
    /// Descending by mean; ties keep model feature order.
    std::vector<FeatureImportance> entries;
};

/// Accuracy drop when one column at a time is shuffled, over `repeats` shuffles.
/// Each feature draws from its own stream derived from (seed, feature index), so the
/// serial and parallel paths agree bit for bit.
GlobalExplanation permutation_importance(const knn::KnnModel& model,
                                         const features::FeatureTable& table,
                                         std::size_t repeats, std::uint64_t rng_seed,
                                         Execution exec = Execution::parallel);

/// Two-column "Weight | Feature" rendering, e.g. "0.0751 ± 0.0121 | skewness".
std::string render_global_text(const GlobalExplanation& g);
void save_global_csv(const GlobalExplanation& g, const std::filesystem::path& path);
nlohmann::json global_to_json(const GlobalExplanation& g);

struct LocalExplanation {
    std::vector<std::string> feature_names;
    std::vector<double> instance;
    ToolCondition predicted_label = ToolCondition::GoodCondition;
    /// coefficients[class][feature], per unit of training std; positive supports the class.
    std::array<std::vector<double>, kNumClasses> coefficients{};
    std::array<double, kNumClasses> intercepts{};
    /// Weighted R^2 of each class surrogate, clamped to [0, 1].
    std::array<double, kNumClasses> r_squared{};
    double kernel_width = 0.0;
    std::size_t n_samples = 0;
};

inline double default_kernel_width(std::size_t n_features) {
    return 0.75 * std::sqrt(static_cast<double>(n_features));
}

/// Anything with per-class scores over raw feature vectors can be explained.
using ScoreFunction = std::function<std::array<double, kNumClasses>(std::span<const double>)>;

/// Share of the KNN class score held by each class (scores / their sum).
std::array<double, kNumClasses> score_shares(const knn::Prediction& p);

LocalExplanation lime_explain(const knn::KnnModel& model, std::span<const double> instance,
                              std::size_t n_samples, double kernel_width,
                              std::uint64_t rng_seed);

/// Core routine used by lime_explain. `feature_std` sets both the perturbation scale and
/// the distance normalization; `predicted` is reported as the explained label.
LocalExplanation lime_explain(const ScoreFunction& score, std::span<const std::string> names,
                              std::span<const double> instance,
                              std::span<const double> feature_std, ToolCondition predicted,
                              std::size_t n_samples, double kernel_width,
                              std::uint64_t rng_seed);

nlohmann::json local_to_json(const LocalExplanation& e);

struct Projection2D {
    std::vector<std::string> feature_names;
    std::vector<double> center;
    std::vector<double> scale;  // 1 for zero-variance columns
    std::array<std::vector<double>, 2> components;
    std::array<double, 2> explained_variance{};
    std::vector<std::array<double, 2>> points;
    std::vector<std::optional<ToolCondition>> labels;

    /// Projects a raw row (projection feature order).
    std::array<double, 2> project(std::span<const double> raw) const;
};

/// Standardizes internally, then keeps the top-2 covariance eigenvectors with the
/// largest-magnitude loading of each made positive. Throws when the rank is below 2.
Projection2D pca_project(const features::FeatureTable& table);

struct Segment {
    std::size_t query = 0;
    std::size_t training_index = 0;
    std::array<double, 2> from{};
    std::array<double, 2> to{};
};

struct NeighborPlotData {
    std::vector<std::array<double, 2>> training_points;
    std::vector<ToolCondition> training_labels;
    std::vector<std::array<double, 2>> query_points;
    std::vector<ToolCondition> query_predictions;
    std::vector<Segment> segments;
};

/// `projection` must be fitted on the model's training table in raw units.
NeighborPlotData neighbor_plot_data(const knn::KnnModel& model,
                                    std::span<const std::vector<double>> queries,
                                    const Projection2D& projection);

void save_plot_csv(const NeighborPlotData& data, const std::filesystem::path& path);

}  // namespace toolwatch::explain
