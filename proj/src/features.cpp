#include "toolwatch/features.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "parallel.hpp"

namespace toolwatch::features {

std::vector<std::string> canonical_names() {
    return {kFeatureNames.begin(), kFeatureNames.end()};
}

std::optional<std::size_t> canonical_index(std::string_view name) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        if (kFeatureNames[i] == name) return i;
    }
    return std::nullopt;
}

FeatureTable::FeatureTable(std::vector<std::string> feature_names) : names_(std::move(feature_names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        for (std::size_t j = i + 1; j < names_.size(); ++j) {
            if (names_[i] == names_[j]) throw Error("duplicate feature name '" + names_[i] + "'");
        }
    }
}

void FeatureTable::add_row(std::vector<double> values, std::optional<ToolCondition> label) {
    if (values.size() != names_.size()) {
        throw Error("feature row has " + std::to_string(values.size()) + " values, table has " +
                    std::to_string(names_.size()) + " columns");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) throw Error("non-finite value in column '" + names_[i] + "'");
    }
    rows_.push_back({std::move(values), label});
}

std::size_t FeatureTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    throw Error("feature '" + std::string(name) + "' not in table");
}

std::array<std::size_t, kNumClasses> FeatureTable::class_counts() const {
    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& r : rows_) {
        if (r.label) ++counts[severity(*r.label)];
    }
    return counts;
}

bool FeatureTable::fully_labeled() const {
    return std::all_of(rows_.begin(), rows_.end(), [](const Row& r) { return r.label.has_value(); });
}

std::vector<ToolCondition> FeatureTable::labels() const {
    std::vector<ToolCondition> out;
    out.reserve(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (!rows_[i].label) throw Error("row " + std::to_string(i) + " is unlabeled");
        out.push_back(*rows_[i].label);
    }
    return out;
}

FeatureTable FeatureTable::project(std::span<const std::string> names) const {
    std::vector<std::size_t> cols;
    cols.reserve(names.size());
    for (const auto& n : names) cols.push_back(column(n));
    FeatureTable out(std::vector<std::string>(names.begin(), names.end()));
    out.rows_.reserve(rows_.size());
    for (const auto& r : rows_) {
        Row row{std::vector<double>(cols.size()), r.label};
        for (std::size_t j = 0; j < cols.size(); ++j) row.values[j] = r.values[cols[j]];
        out.rows_.push_back(std::move(row));
    }
    return out;
}

FeatureTable FeatureTable::subset(std::span<const std::size_t> indices) const {
    FeatureTable out(names_);
    out.rows_.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= rows_.size()) throw Error("row index out of range");
        out.rows_.push_back(rows_[i]);
    }
    return out;
}

FeatureVector extract(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < dataset::kMinWindowLength) {
        throw Error("extract: window needs at least 4 samples, got " + std::to_string(n));
    }
    const double nd = static_cast<double>(n);

    FeatureVector fv;
    auto set = [&](Feature f, double v) { fv.values[static_cast<std::size_t>(f)] = v; };

    const double sum = std::accumulate(x.begin(), x.end(), 0.0);
    const double mean = sum / nd;
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const double minimum = *lo;
    const double maximum = *hi;

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const double variance = m2 / (nd - 1.0);
    const double stddev = std::sqrt(variance);
    m2 /= nd;
    m3 /= nd;
    m4 /= nd;

    double skewness = 0.0;
    double kurtosis = 0.0;
    if (m2 > 0.0) {
        // Adjusted Fisher-Pearson skewness and bias-corrected excess kurtosis.
        skewness = std::sqrt(nd * (nd - 1.0)) / (nd - 2.0) * m3 / std::pow(m2, 1.5);
        const double g2 = m4 / (m2 * m2) - 3.0;
        kurtosis = (nd - 1.0) / ((nd - 2.0) * (nd - 3.0)) * ((nd + 1.0) * g2 + 6.0);
    }

    std::vector<double> sorted(x.begin(), x.end());
    const std::size_t mid = n / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
    double median = sorted[mid];
    if (n % 2 == 0) {
        const double lower =
            *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (lower + median);
    }

    double mode = minimum;
    if (maximum > minimum) {
        std::array<std::size_t, kModeBins> bins{};
        const double width = (maximum - minimum) / static_cast<double>(kModeBins);
        for (double v : x) {
            auto b = static_cast<std::size_t>((v - minimum) / width);
            ++bins[std::min(b, kModeBins - 1)];
        }
        const auto best = static_cast<std::size_t>(
            std::distance(bins.begin(), std::max_element(bins.begin(), bins.end())));
        mode = minimum + (static_cast<double>(best) + 0.5) * width;
    }

    set(Feature::mean, mean);
    set(Feature::median, median);
    set(Feature::kurtosis, kurtosis);
    set(Feature::skewness, skewness);
    set(Feature::standard_error, stddev / std::sqrt(nd));
    set(Feature::variance, variance);
    set(Feature::maximum, maximum);
    set(Feature::minimum, minimum);
    set(Feature::range, maximum - minimum);
    set(Feature::summation, sum);
    set(Feature::standard_deviation, stddev);
    set(Feature::mode, mode);
    return fv;
}

FeatureVector extract(const dataset::Window& window) {
    FeatureVector fv = extract(std::span<const double>(window.samples));
    fv.label = window.label;
    return fv;
}

FeatureTable build_table(std::span<const dataset::Window> windows, Execution exec) {
    if (windows.empty()) throw Error("build_table: no windows");
    std::vector<FeatureVector> vectors(windows.size());
    detail::for_each_index(windows.size(), exec,
                           [&](std::size_t i) { vectors[i] = extract(windows[i]); });

    FeatureTable table(canonical_names());
    for (auto& fv : vectors) {
        table.add_row(std::vector<double>(fv.values.begin(), fv.values.end()), fv.label);
    }
    return table;
}

void save_csv(const FeatureTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write feature table " + path.string());
    for (const auto& n : table.feature_names()) out << n << ',';
    out << "label\n";
    out << std::setprecision(17);
    for (const auto& r : table.rows()) {
        for (double v : r.values) out << v << ',';
        if (r.label) out << severity(*r.label);
        out << '\n';
    }
    if (!out) throw Error("write failed for " + path.string());
}

FeatureTable load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read feature table " + path.string());

    auto split_line = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) {
            if (!f.empty() && f.back() == '\r') f.pop_back();
            out.push_back(f);
        }
        if (!line.empty() && (line.back() == ',')) out.emplace_back();
        return out;
    };

    std::string line;
    if (!std::getline(in, line)) throw Error("feature table " + path.string() + " is empty");
    auto header = split_line(line);
    if (header.empty() || header.back() != "label") {
        throw Error(path.string() + ": header must end with 'label'");
    }
    header.pop_back();
    FeatureTable table(header);

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line);
        if (fields.size() != header.size() + 1) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size() + 1) + " fields");
        }
        std::vector<double> values(header.size());
        for (std::size_t j = 0; j < header.size(); ++j) {
            std::size_t used = 0;
            try {
                values[j] = std::stod(fields[j], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != fields[j].size()) {
                throw Error(path.string() + ":" + std::to_string(line_no) + ": bad value for '" +
                            header[j] + "'");
            }
        }
        std::optional<ToolCondition> label;
        if (!fields.back().empty()) label = parse_condition(fields.back());
        try {
            table.add_row(std::move(values), label);
        } catch (const Error& e) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return table;
}

}  // namespace toolwatch::features
