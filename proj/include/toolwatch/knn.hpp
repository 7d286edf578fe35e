#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "toolwatch/common.hpp"
#include "toolwatch/features.hpp"

namespace toolwatch::knn {

enum class MetricKind { manhattan, euclidean, minkowski, cosine };

struct Metric {
    MetricKind kind = MetricKind::euclidean;
    double p = 2.0;  // minkowski only

    static Metric manhattan() { return {MetricKind::manhattan, 1.0}; }
    static Metric euclidean() { return {MetricKind::euclidean, 2.0}; }
    static Metric minkowski(double p);
    static Metric cosine() { return {MetricKind::cosine, 0.0}; }

    bool operator==(const Metric&) const = default;
};

enum class Weighting { uniform, inverse_distance };

std::string metric_name(const Metric& m);
std::string_view weighting_name(Weighting w);
/// Parses "manhattan", "euclidean", "cosine", "minkowski" (p = 3) or "minkowski:<p>".
Metric parse_metric(std::string_view text);
Weighting parse_weighting(std::string_view text);

struct Hyperparameters {
    std::size_t n_neighbors = 5;
    Metric metric = Metric::euclidean();
    Weighting weighting = Weighting::uniform;

    void validate() const;
    bool operator==(const Hyperparameters&) const = default;
};

/// The conventional defaults of mainstream KNN implementations.
inline Hyperparameters vanilla_hyperparameters() { return {}; }

/// Cosine distances below this are reported as exactly 0.
inline constexpr double kCosineSnap = 1e-12;

/// Throws on dimension mismatch, and for cosine when either vector is zero.
double distance(std::span<const double> a, std::span<const double> b, const Metric& metric);

struct Neighbor {
    std::size_t index = 0;  // training row
    double distance = 0.0;
    double weight = 0.0;
    ToolCondition label = ToolCondition::GoodCondition;
};

struct Prediction {
    ToolCondition label = ToolCondition::GoodCondition;
    std::array<double, kNumClasses> scores{};
    /// Ascending by distance, ties by training index.
    std::vector<Neighbor> neighbors;
};

class KnnModel {
public:
    const Hyperparameters& hyperparameters() const { return hp_; }
    const std::vector<std::string>& feature_names() const { return names_; }
    std::size_t dimension() const { return names_.size(); }
    std::size_t size() const { return labels_.size(); }
    bool standardized() const { return standardized_; }
    const std::vector<double>& means() const { return means_; }
    const std::vector<double>& scales() const { return scales_; }
    const std::vector<ToolCondition>& labels() const { return labels_; }
    /// Features dropped at fit time because their std was zero.
    const std::vector<std::string>& dropped_features() const { return dropped_; }

    /// Stored (scaled) training vector.
    std::span<const double> stored(std::size_t i) const;
    /// Training vector mapped back to raw feature units.
    std::vector<double> raw(std::size_t i) const;
    /// Maps raw feature values (model order) into the stored space.
    std::vector<double> scale(std::span<const double> raw_values) const;

    /// Rows of `table` reordered to the model's feature names.
    features::FeatureTable align(const features::FeatureTable& table) const;
    /// The training set in raw units, labeled.
    features::FeatureTable training_table() const;

    nlohmann::json to_json() const;
    static KnnModel from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static KnnModel load(const std::filesystem::path& path);

    bool operator==(const KnnModel&) const = default;

private:
    friend KnnModel fit(const features::FeatureTable&, const Hyperparameters&, bool);

    Hyperparameters hp_;
    std::vector<std::string> names_;
    std::vector<std::string> dropped_;
    bool standardized_ = false;
    std::vector<double> means_;
    std::vector<double> scales_;
    std::vector<double> vectors_;  // row-major, size() x dimension()
    std::vector<ToolCondition> labels_;
};

inline constexpr int kModelFormatVersion = 1;

KnnModel fit(const features::FeatureTable& table, const Hyperparameters& hp,
             bool standardize = true);

/// `x` holds raw feature values in the model's feature order.
Prediction predict(const KnnModel& model, std::span<const double> x);

std::vector<Prediction> predict_batch(const KnnModel& model,
                                      std::span<const std::vector<double>> rows,
                                      Execution exec = Execution::parallel);

/// Convenience: aligns the table, predicts every row.
std::vector<Prediction> predict_table(const KnnModel& model, const features::FeatureTable& table,
                                      Execution exec = Execution::parallel);

}  // namespace toolwatch::knn
