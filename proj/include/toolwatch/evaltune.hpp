#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "toolwatch/common.hpp"
#include "toolwatch/features.hpp"
#include "toolwatch/knn.hpp"
#include "json.hpp"

namespace toolwatch::evaltune {

/// Rows are actual classes, columns predicted classes.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

    std::size_t total() const;
    std::size_t trace() const;
    std::size_t row_sum(std::size_t actual) const;
    std::size_t col_sum(std::size_t predicted) const;
    std::size_t at(ToolCondition actual, ToolCondition predicted) const {
        return counts[severity(actual)][severity(predicted)];
    }

    static ConfusionMatrix from_counts(
        const std::array<std::array<std::size_t, kNumClasses>, kNumClasses>& counts);
};

ConfusionMatrix confusion(std::span<const ToolCondition> actual,
                          std::span<const ToolCondition> predicted);

struct ClassMetrics {
    /// nullopt when the denominator is zero.
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> fp_rate;
    std::optional<double> roc_auc;
};

struct MetricsReport {
    double accuracy = 0.0;
    std::array<ClassMetrics, kNumClasses> per_class{};
    /// Percentage of all samples whose actual class is worn but were predicted Good.
    double type2_error_pct = 0.0;
};

/// Per-sample class scores paired with the actual labels, for one-vs-rest ROC AUC.
struct ScoredLabels {
    std::vector<ToolCondition> actual;
    std::vector<std::array<double, kNumClasses>> scores;
};

MetricsReport metrics(const ConfusionMatrix& cm, const std::optional<ScoredLabels>& scored = {});

double type2_error_pct(const ConfusionMatrix& cm);

/// One-vs-rest ROC AUC for `positive`, trapezoidal rule with tied scores grouped.
std::optional<double> roc_auc_ovr(const ScoredLabels& scored, ToolCondition positive);

enum class Rounding { nearest, toward_zero };

/// Percentage value rounded to two decimals.
double round_pct(double pct, Rounding mode = Rounding::nearest);

/// The percentage-annotated block: counts with cell percentages, row and column totals
/// with their correct/incorrect rates, and the overall correct count.
std::string render_matrix_text(const ConfusionMatrix& cm, std::string_view title);
void save_matrix_csv(const ConfusionMatrix& cm, const std::filesystem::path& path);

nlohmann::json metrics_to_json(const MetricsReport& report);

struct Split {
    features::FeatureTable train;
    features::FeatureTable test;
};

Split split(const features::FeatureTable& table, double test_fraction, bool stratified,
            std::uint64_t rng_seed);

/// Fold assignment for every row (values in [0, k)). Stratified by label.
std::vector<std::size_t> stratified_folds(const features::FeatureTable& table, std::size_t k,
                                          std::uint64_t rng_seed);

struct CvResult {
    std::vector<double> fold_accuracies;
    double mean = 0.0;
    double stddev = 0.0;  // population std over folds
};

CvResult kfold_cv(const features::FeatureTable& table, const knn::Hyperparameters& hp,
                  std::size_t k, std::uint64_t rng_seed, bool standardize = true);

struct GridSpec {
    std::vector<std::size_t> n_neighbors;
    std::vector<knn::Metric> metrics;
    std::vector<knn::Weighting> weightings;
    std::size_t cv_folds = 5;

    void validate() const;
    /// n_neighbors 1..10, all four metrics, both weightings, 5 folds.
    static GridSpec defaults();
    /// Every combination, n_neighbors outermost, then metric, then weighting.
    std::vector<knn::Hyperparameters> combinations() const;
};

struct GridRow {
    knn::Hyperparameters hp;
    CvResult cv;
};

struct GridResult {
    knn::Hyperparameters best;
    std::vector<GridRow> rows;  // combination order
};

/// True when `a` should be preferred over `b` at equal CV mean.
bool preferred_on_tie(const knn::Hyperparameters& a, const knn::Hyperparameters& b);

GridResult grid_search(const features::FeatureTable& table, const GridSpec& grid,
                       std::uint64_t rng_seed, Execution exec = Execution::parallel,
                       bool standardize = true);

void save_grid_csv(const GridResult& result, const std::filesystem::path& path);

struct SweepRow {
    double test_fraction = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

std::vector<SweepRow> split_sweep(const features::FeatureTable& table,
                                  const knn::Hyperparameters& hp,
                                  std::span<const double> fractions, std::uint64_t rng_seed,
                                  bool standardize = true);

struct KfoldSweepRow {
    std::size_t k = 0;
    CvResult cv;
};

std::vector<KfoldSweepRow> kfold_sweep(const features::FeatureTable& table,
                                       const knn::Hyperparameters& hp, std::size_t k_min,
                                       std::size_t k_max, std::uint64_t rng_seed,
                                       bool standardize = true);

double accuracy(std::span<const ToolCondition> actual, std::span<const knn::Prediction> predicted);

}  // namespace toolwatch::evaltune
