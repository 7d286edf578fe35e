#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "toolwatch/common.hpp"
#include "toolwatch/dataset.hpp"

namespace toolwatch::features {

inline constexpr std::size_t kNumFeatures = 12;
inline constexpr std::size_t kModeBins = 64;

/// Canonical feature order.
enum class Feature : std::size_t {
    mean,
    median,
    kurtosis,
    skewness,
    standard_error,
    variance,
    maximum,
    minimum,
    range,
    summation,
    standard_deviation,
    mode,
};

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "mean",    "median",  "kurtosis", "skewness",  "standard_error",     "variance",
    "maximum", "minimum", "range",    "summation", "standard_deviation", "mode"};

std::vector<std::string> canonical_names();

/// Index of `name` in the canonical order, or nullopt.
std::optional<std::size_t> canonical_index(std::string_view name);

struct FeatureVector {
    std::array<double, kNumFeatures> values{};
    std::optional<ToolCondition> label;

    double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }
};

/// Labeled rows over an ordered set of named columns. Columns may be a subset of the canonical twelve.
class FeatureTable {
public:
    struct Row {
        std::vector<double> values;
        std::optional<ToolCondition> label;
    };

    FeatureTable() = default;
    explicit FeatureTable(std::vector<std::string> feature_names);

    const std::vector<std::string>& feature_names() const { return names_; }
    const std::vector<Row>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    std::size_t dimension() const { return names_.size(); }
    bool empty() const { return rows_.empty(); }
    const Row& operator[](std::size_t i) const { return rows_[i]; }

    void add_row(std::vector<double> values, std::optional<ToolCondition> label);

    /// Column index of a named feature; throws if absent.
    std::size_t column(std::string_view name) const;

    /// Per-label counts; unlabeled rows are not counted.
    std::array<std::size_t, kNumClasses> class_counts() const;
    bool fully_labeled() const;

    /// Labels of every row; throws if any row is unlabeled.
    std::vector<ToolCondition> labels() const;

    /// New table with the named columns in the given order.
    FeatureTable project(std::span<const std::string> names) const;

    /// New table holding the rows at `indices`, in that order.
    FeatureTable subset(std::span<const std::size_t> indices) const;

private:
    std::vector<std::string> names_;
    std::vector<Row> rows_;
};

/// Throws Error if the window is shorter than four samples.
FeatureVector extract(std::span<const double> samples);
FeatureVector extract(const dataset::Window& window);

FeatureTable build_table(std::span<const dataset::Window> windows,
                         Execution exec = Execution::parallel);

/// CSV with a header of feature names followed by `label`; unlabeled rows leave the label empty.
void save_csv(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable load_csv(const std::filesystem::path& path);

}  // namespace toolwatch::features
