#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "toolwatch/dataset.hpp"
#include "toolwatch/dtree.hpp"
#include "toolwatch/evaltune.hpp"
#include "toolwatch/explain.hpp"
#include "toolwatch/knn.hpp"

namespace toolwatch::pipeline {

/// Generator defaults used when a config has no synth.* keys.
dataset::GeneratorConfig default_generator();

/// Settings shared by every command. Loaded from `key = value` text; see README.
struct PipelineConfig {
    std::filesystem::path out_dir = "out";
    std::optional<std::filesystem::path> manifest;      // default <out>/manifest.csv
    std::optional<std::filesystem::path> features_csv;  // default <out>/features.csv
    std::optional<std::filesystem::path> model_path;    // default <out>/model.json
    std::uint64_t seed = 42;

    std::size_t window_length = dataset::kDefaultWindowLength;
    std::size_t stride = dataset::kDefaultWindowLength;
    double z_threshold = dataset::kDefaultZThreshold;
    /// 0 disables augmentation.
    std::size_t augment_target = 0;

    std::size_t select_k = 10;
    std::size_t tree_max_depth = dtree::kDefaultMaxDepth;
    std::size_t tree_min_samples_split = dtree::kDefaultMinSamplesSplit;
    bool standardize = true;

    evaltune::GridSpec grid = evaltune::GridSpec::defaults();
    /// 0 trains and evaluates on the full table.
    double test_fraction = 0.0;

    std::size_t importance_repeats = explain::kDefaultRepeats;
    std::size_t lime_samples = explain::kDefaultLimeSamples;
    /// 0 selects 0.75 * sqrt(feature count).
    double lime_kernel_width = 0.0;
    std::size_t scatter_queries = 5;

    std::vector<double> sweep_fractions = {0.1, 0.2, 0.3, 0.4, 0.5};
    std::size_t sweep_k_min = 5;
    std::size_t sweep_k_max = 10;
    knn::Hyperparameters sweep_hp{4, knn::Metric::manhattan(), knn::Weighting::inverse_distance};

    dataset::GeneratorConfig synth = default_generator();

    std::filesystem::path manifest_path() const { return manifest.value_or(out_dir / "manifest.csv"); }
    std::filesystem::path features_path() const { return features_csv.value_or(out_dir / "features.csv"); }
    std::filesystem::path model_file() const { return model_path.value_or(out_dir / "model.json"); }
};

/// Parses `key = value` lines ('#' comments). Unknown keys are errors. Relative paths
/// resolve against the config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

enum class TrainMode { vanilla, tuned };

struct IngestResult {
    std::size_t files = 0;
    std::size_t removed_samples = 0;
    std::size_t windows = 0;
    std::size_t rows = 0;
};

struct TrainResult {
    std::vector<std::string> selected_features;
    knn::Hyperparameters hyperparameters;
    std::optional<evaltune::GridResult> grid;
    evaltune::ConfusionMatrix train_matrix;
    std::optional<evaltune::ConfusionMatrix> test_matrix;
    evaltune::MetricsReport train_metrics;
    std::optional<evaltune::MetricsReport> test_metrics;
};

struct ExplainResult {
    std::optional<explain::GlobalExplanation> global;
    std::optional<explain::LocalExplanation> local;
    std::optional<knn::Prediction> prediction;
};

struct SweepResult {
    std::vector<evaltune::SweepRow> split_rows;
    std::vector<evaltune::KfoldSweepRow> kfold_rows;
};

/// Every command writes into config.out_dir and deletes what it wrote if it fails.
void cmd_synth(const PipelineConfig& config);
IngestResult cmd_ingest(const PipelineConfig& config);
TrainResult cmd_train(const PipelineConfig& config, TrainMode mode);
/// `instance` holds feature name -> raw value; empty for the global report.
ExplainResult cmd_explain(const PipelineConfig& config, const std::map<std::string, double>& instance);
SweepResult cmd_sweep(const PipelineConfig& config);

/// Parses "name=value,name=value" or reads a JSON object file.
std::map<std::string, double> parse_instance(const std::string& text);

/// Orders an instance map by the model's features. Throws naming missing or unknown keys
/// (keys that are canonical features but unused by the model are ignored).
std::vector<double> instance_vector(const knn::KnnModel& model, const std::map<std::string, double>& instance);

}  // namespace toolwatch::pipeline
