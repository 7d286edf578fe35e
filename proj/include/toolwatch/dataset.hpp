#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toolwatch/common.hpp"

namespace toolwatch::dataset {

enum class Direction { X, Y };

Direction parse_direction(std::string_view text);
char direction_char(Direction d);

inline constexpr double kDefaultSamplingRateHz = 11600.0;
inline constexpr double kDefaultZThreshold = 4.0;
inline constexpr std::size_t kDefaultWindowLength = 1024;
inline constexpr std::size_t kMinWindowLength = 4;
/// Jitter noise standard deviation as a fraction of the source window's std.
inline constexpr double kJitterFraction = 0.05;

/// A raw force time series in one direction.
struct SignalSeries {
    std::vector<double> samples;  // newton
    double sampling_rate_hz = kDefaultSamplingRateHz;
    Direction direction = Direction::X;
    std::optional<ToolCondition> label;
    std::string source_id;
};

struct Window {
    std::vector<double> samples;
    std::string source_id;
    ToolCondition label = ToolCondition::GoodCondition;
};

struct ClassParameters {
    double mean = 0.0;
    double stddev = 1.0;
    /// Shape of the innovation: 0 is Gaussian, positive values skew right, negative left.
    double skew = 0.0;
    /// AR(1) coefficient in [0, 1).
    double ar_coefficient = 0.0;

    bool operator==(const ClassParameters&) const = default;
};

struct GeneratorConfig {
    std::array<ClassParameters, kNumClasses> classes{};
    std::size_t windows_per_class = 100;
    std::size_t window_length = kDefaultWindowLength;
    std::uint64_t rng_seed = 0;
    double sampling_rate_hz = kDefaultSamplingRateHz;
    Direction direction = Direction::X;
    /// Each class is recorded as this many runs; windows of a run share an offset drawn
    /// once per run (mean + N(0, session_mean_spread), stddev * (1 + N(0, session_std_spread))).
    std::size_t sessions_per_class = 1;
    double session_mean_spread = 0.0;
    double session_std_spread = 0.0;
    /// Disables the distinct-parameters check; used for negative controls only.
    bool allow_identical_classes = false;

    void validate() const;
};

struct ManifestEntry {
    std::filesystem::path path;
    Direction direction = Direction::X;
    ToolCondition label = ToolCondition::GoodCondition;
};

struct OutlierResult {
    SignalSeries series;
    std::size_t removed_count = 0;
};

SignalSeries load_signal(const std::filesystem::path& path, Direction direction);

/// Writes one reading per line with a leading '#' header, round-trip precision.
void save_signal(const SignalSeries& series, const std::filesystem::path& path);

/// Parses `<path>,<X|Y>,<0|1|2>` lines. Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void save_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& path);

/// Single-pass z-score filter. Mean and std (population) come from the input series.
OutlierResult remove_outliers(const SignalSeries& series, double z_threshold = kDefaultZThreshold);

std::vector<Window> make_windows(const SignalSeries& series, std::size_t window_length,
                                 std::size_t stride);

/// Grows the pool to `target_count` with label-preserving jittered copies.
std::vector<Window> augment(std::span<const Window> windows, std::size_t target_count,
                            std::uint64_t rng_seed);

std::vector<SignalSeries> synthesize(const GeneratorConfig& config);

}  // namespace toolwatch::dataset
