#include "toolwatch/evaltune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "parallel.hpp"

namespace toolwatch::evaltune {

namespace {

constexpr double kTieTolerance = 1e-12;

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

CvResult summarize(std::vector<double> accuracies) {
    CvResult r;
    r.fold_accuracies = std::move(accuracies);
    const double n = static_cast<double>(r.fold_accuracies.size());
    r.mean = std::accumulate(r.fold_accuracies.begin(), r.fold_accuracies.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : r.fold_accuracies) ss += (a - r.mean) * (a - r.mean);
    r.stddev = std::sqrt(ss / n);
    return r;
}

CvResult kfold_impl(const features::FeatureTable& table, const knn::Hyperparameters& hp,
                    std::size_t k, std::uint64_t rng_seed, bool standardize, Execution predict_exec) {
    const auto folds = stratified_folds(table, k, rng_seed);
    std::vector<double> accuracies;
    accuracies.reserve(k);
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == f ? test_idx : train_idx).push_back(i);
        const auto train = table.subset(train_idx);
        const auto test = table.subset(test_idx);
        const auto model = knn::fit(train, hp, standardize);
        const auto predictions = knn::predict_table(model, test, predict_exec);
        const auto actual = test.labels();
        accuracies.push_back(accuracy(actual, predictions));
    }
    return summarize(std::move(accuracies));
}

std::string pct(double num, double den) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << (den > 0 ? 100.0 * num / den : 0.0) << '%';
    return s.str();
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return t;
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) t += counts[c][c];
    return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t actual) const {
    return std::accumulate(counts[actual].begin(), counts[actual].end(), std::size_t{0});
}

std::size_t ConfusionMatrix::col_sum(std::size_t predicted) const {
    std::size_t t = 0;
    for (const auto& row : counts) t += row[predicted];
    return t;
}

ConfusionMatrix ConfusionMatrix::from_counts(
    const std::array<std::array<std::size_t, kNumClasses>, kNumClasses>& counts) {
    ConfusionMatrix cm;
    cm.counts = counts;
    return cm;
}

ConfusionMatrix confusion(std::span<const ToolCondition> actual, std::span<const ToolCondition> predicted) {
    if (actual.size() != predicted.size()) {
        throw Error("confusion: " + std::to_string(actual.size()) + " actual vs " +
                    std::to_string(predicted.size()) + " predicted labels");
    }
    if (actual.empty()) throw Error("confusion: no labels");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < actual.size(); ++i) ++cm.counts[severity(actual[i])][severity(predicted[i])];
    return cm;
}

double type2_error_pct(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) throw Error("type2_error_pct: empty matrix");
    const std::size_t missed = cm.at(ToolCondition::InitialWear, ToolCondition::GoodCondition) +
                               cm.at(ToolCondition::ProgressedWear, ToolCondition::GoodCondition);
    return 100.0 * static_cast<double>(missed) / static_cast<double>(total);
}

std::optional<double> roc_auc_ovr(const ScoredLabels& scored, ToolCondition positive) {
    if (scored.actual.size() != scored.scores.size()) throw Error("roc_auc: label/score count mismatch");
    const std::size_t c = severity(positive);
    std::vector<std::pair<double, bool>> items;
    items.reserve(scored.actual.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < scored.actual.size(); ++i) {
        const bool is_pos = scored.actual[i] == positive;
        pos += is_pos;
        items.emplace_back(scored.scores[i][c], is_pos);
    }
    const std::size_t neg = items.size() - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    // Sweep thresholds from high to low; tied scores form one ROC step (trapezoid).
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double area = 0.0;
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < items.size();) {
        double dtp = 0.0, dfp = 0.0;
        const double s = items[i].first;
        for (; i < items.size() && items[i].first == s; ++i) (items[i].second ? dtp : dfp) += 1.0;
        area += dfp * (tp + dtp / 2.0);
        tp += dtp;
        fp += dfp;
    }
    return area / (static_cast<double>(pos) * static_cast<double>(neg));
}

MetricsReport metrics(const ConfusionMatrix& cm, const std::optional<ScoredLabels>& scored) {
    const std::size_t total = cm.total();
    if (total == 0) throw Error("metrics: empty confusion matrix");

    MetricsReport r;
    r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    r.type2_error_pct = type2_error_pct(cm);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        auto& m = r.per_class[c];
        const std::size_t tp = cm.counts[c][c];
        const std::size_t row = cm.row_sum(c);
        const std::size_t col = cm.col_sum(c);
        m.precision = ratio(tp, col);
        m.recall = ratio(tp, row);
        if (m.precision && m.recall) {
            const double sum = *m.precision + *m.recall;
            m.f1 = sum > 0.0 ? 2.0 * *m.precision * *m.recall / sum : 0.0;
        }
        const std::size_t fp = col - tp;
        const std::size_t tn = total - row - col + tp;
        m.fp_rate = ratio(fp, fp + tn);
        if (scored) m.roc_auc = roc_auc_ovr(*scored, static_cast<ToolCondition>(c));
    }
    return r;
}

double round_pct(double pct, Rounding mode) {
    const double scaled = pct * 100.0;
    // truncation: relative nudge for decimal-exact values stored just below
    const double nudge = std::abs(scaled) * 1e-12;
    if (mode == Rounding::nearest) return std::round(scaled) / 100.0;
    return std::trunc(scaled + (scaled >= 0 ? nudge : -nudge)) / 100.0;
}

std::string render_matrix_text(const ConfusionMatrix& cm, std::string_view title) {
    const double total = static_cast<double>(cm.total());
    constexpr int w = 24;
    std::ostringstream out;
    out << title << '\n';
    out << std::left << std::setw(w) << "Actual \\ Predicted";
    for (auto c : kAllConditions) out << std::setw(w) << display_name(c);
    out << "SUM\n";
    for (std::size_t a = 0; a < kNumClasses; ++a) {
        out << std::setw(w) << display_name(static_cast<ToolCondition>(a));
        for (std::size_t p = 0; p < kNumClasses; ++p) {
            const auto n = cm.counts[a][p];
            out << std::setw(w) << (std::to_string(n) + " " + pct(static_cast<double>(n), total));
        }
        const double row = static_cast<double>(cm.row_sum(a));
        const double diag = static_cast<double>(cm.counts[a][a]);
        out << cm.row_sum(a) << ' ' << pct(diag, row) << ' ' << pct(row - diag, row) << '\n';
    }
    out << std::setw(w) << "SUM";
    for (std::size_t p = 0; p < kNumClasses; ++p) {
        const double col = static_cast<double>(cm.col_sum(p));
        const double diag = static_cast<double>(cm.counts[p][p]);
        out << std::setw(w)
            << (std::to_string(cm.col_sum(p)) + " " + pct(diag, col) + " " + pct(col - diag, col));
    }
    const double trace = static_cast<double>(cm.trace());
    out << cm.trace() << " / " << cm.total() << ' ' << pct(trace, total) << ' '
        << pct(total - trace, total) << '\n';
    return out.str();
}

void save_matrix_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "actual\\predicted";
    for (auto c : kAllConditions) out << ',' << key_name(c);
    out << '\n';
    for (std::size_t a = 0; a < kNumClasses; ++a) {
        out << key_name(static_cast<ToolCondition>(a));
        for (std::size_t p = 0; p < kNumClasses; ++p) out << ',' << cm.counts[a][p];
        out << '\n';
    }
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
    auto opt = [](const std::optional<double>& v) -> nlohmann::json {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::json j;
    j["accuracy"] = report.accuracy;
    j["type2_error_pct"] = report.type2_error_pct;
    auto classes = nlohmann::json::object();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto& m = report.per_class[c];
        classes[std::string(key_name(static_cast<ToolCondition>(c)))] = {
            {"precision", opt(m.precision)}, {"recall", opt(m.recall)}, {"f1", opt(m.f1)},
            {"fp_rate", opt(m.fp_rate)},     {"roc_auc", opt(m.roc_auc)}};
    }
    j["per_class"] = std::move(classes);
    return j;
}

Split split(const features::FeatureTable& table, double test_fraction, bool stratified,
            std::uint64_t rng_seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error("split: test fraction must lie in (0, 1)");
    }
    std::mt19937_64 rng(rng_seed);
    std::vector<std::size_t> test_idx;

    auto take = [&](std::vector<std::size_t> pool) {
        std::shuffle(pool.begin(), pool.end(), rng);
        const auto n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(pool.size())));
        test_idx.insert(test_idx.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
    };
    if (stratified) {
        std::array<std::vector<std::size_t>, kNumClasses> by_class;
        const auto labels = table.labels();
        for (std::size_t i = 0; i < labels.size(); ++i) by_class[severity(labels[i])].push_back(i);
        for (auto& pool : by_class) take(std::move(pool));
    } else {
        std::vector<std::size_t> all(table.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        take(std::move(all));
    }
    std::sort(test_idx.begin(), test_idx.end());
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0, t = 0; i < table.size(); ++i) {
        if (t < test_idx.size() && test_idx[t] == i) {
            ++t;
        } else {
            train_idx.push_back(i);
        }
    }
    if (test_idx.empty() || train_idx.empty()) {
        throw Error("split: fraction " + std::to_string(test_fraction) + " leaves one side empty");
    }
    return {table.subset(train_idx), table.subset(test_idx)};
}

std::vector<std::size_t> stratified_folds(const features::FeatureTable& table, std::size_t k,
                                          std::uint64_t rng_seed) {
    if (k < 2) throw Error("k-fold: K must be at least 2");
    if (k > table.size()) {
        throw Error("k-fold: K = " + std::to_string(k) + " exceeds row count " +
                    std::to_string(table.size()));
    }
    const auto labels = table.labels();
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[severity(labels[i])].push_back(i);

    std::mt19937_64 rng(rng_seed);
    std::vector<std::size_t> folds(table.size());
    std::size_t position = 0;
    for (auto& pool : by_class) {
        std::shuffle(pool.begin(), pool.end(), rng);
        for (std::size_t i : pool) folds[i] = position++ % k;
    }
    return folds;
}

CvResult kfold_cv(const features::FeatureTable& table, const knn::Hyperparameters& hp, std::size_t k,
                  std::uint64_t rng_seed, bool standardize) {
    return kfold_impl(table, hp, k, rng_seed, standardize, Execution::parallel);
}

void GridSpec::validate() const {
    if (n_neighbors.empty() || metrics.empty() || weightings.empty()) {
        throw Error("grid: every candidate list must be non-empty");
    }
    if (cv_folds < 2) throw Error("grid: cv_folds must be at least 2");
    for (auto k : n_neighbors) {
        if (k < 1) throw Error("grid: n_neighbors must be positive");
    }
}

GridSpec GridSpec::defaults() {
    GridSpec g;
    for (std::size_t k = 1; k <= 10; ++k) g.n_neighbors.push_back(k);
    g.metrics = {knn::Metric::manhattan(), knn::Metric::euclidean(), knn::Metric::minkowski(3.0),
                 knn::Metric::cosine()};
    g.weightings = {knn::Weighting::uniform, knn::Weighting::inverse_distance};
    g.cv_folds = 5;
    return g;
}

std::vector<knn::Hyperparameters> GridSpec::combinations() const {
    std::vector<knn::Hyperparameters> out;
    for (auto k : n_neighbors) {
        for (const auto& m : metrics) {
            for (auto w : weightings) out.push_back({k, m, w});
        }
    }
    return out;
}

bool preferred_on_tie(const knn::Hyperparameters& a, const knn::Hyperparameters& b) {
    if (a.n_neighbors != b.n_neighbors) return a.n_neighbors < b.n_neighbors;
    if (a.metric.kind != b.metric.kind) return a.metric.kind < b.metric.kind;
    if (a.metric.p != b.metric.p) return a.metric.p < b.metric.p;
    return a.weighting < b.weighting;
}

GridResult grid_search(const features::FeatureTable& table, const GridSpec& grid, std::uint64_t rng_seed,
                       Execution exec, bool standardize) {
    grid.validate();
    const auto combos = grid.combinations();
    GridResult result;
    result.rows.resize(combos.size());
    detail::for_each_index(combos.size(), exec, [&](std::size_t i) {
        result.rows[i] = {combos[i],
                          kfold_impl(table, combos[i], grid.cv_folds, rng_seed, standardize, Execution::serial)};
    });

    const GridRow* best = &result.rows.front();
    for (const auto& row : result.rows) {
        if (row.cv.mean > best->cv.mean + kTieTolerance) {
            best = &row;
        } else if (std::abs(row.cv.mean - best->cv.mean) <= kTieTolerance && preferred_on_tie(row.hp, best->hp)) {
            best = &row;
        }
    }
    result.best = best->hp;
    return result;
}

void save_grid_csv(const GridResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    const std::size_t folds = result.rows.empty() ? 0 : result.rows.front().cv.fold_accuracies.size();
    out << "n_neighbors,metric,weighting,cv_mean,cv_std";
    for (std::size_t f = 1; f <= folds; ++f) out << ",fold_" << f;
    out << '\n' << std::setprecision(17);
    for (const auto& row : result.rows) {
        out << row.hp.n_neighbors << ',' << knn::metric_name(row.hp.metric) << ','
            << knn::weighting_name(row.hp.weighting) << ',' << row.cv.mean << ',' << row.cv.stddev;
        for (double a : row.cv.fold_accuracies) out << ',' << a;
        out << '\n';
    }
}

double accuracy(std::span<const ToolCondition> actual, std::span<const knn::Prediction> predicted) {
    if (actual.size() != predicted.size()) throw Error("accuracy: length mismatch");
    if (actual.empty()) throw Error("accuracy: no samples");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) hits += actual[i] == predicted[i].label;
    return static_cast<double>(hits) / static_cast<double>(actual.size());
}

std::vector<SweepRow> split_sweep(const features::FeatureTable& table, const knn::Hyperparameters& hp,
                                  std::span<const double> fractions, std::uint64_t rng_seed,
                                  bool standardize) {
    std::vector<SweepRow> rows;
    for (double f : fractions) {
        const auto parts = split(table, f, true, rng_seed);
        const auto model = knn::fit(parts.train, hp, standardize);
        const auto train_pred = knn::predict_table(model, parts.train);
        const auto test_pred = knn::predict_table(model, parts.test);
        rows.push_back({f, accuracy(parts.train.labels(), train_pred),
                        accuracy(parts.test.labels(), test_pred)});
    }
    return rows;
}

std::vector<KfoldSweepRow> kfold_sweep(const features::FeatureTable& table, const knn::Hyperparameters& hp,
                                       std::size_t k_min, std::size_t k_max, std::uint64_t rng_seed,
                                       bool standardize) {
    if (k_min < 2 || k_max < k_min) throw Error("kfold_sweep: need 2 <= k_min <= k_max");
    std::vector<KfoldSweepRow> rows;
    for (std::size_t k = k_min; k <= k_max; ++k) rows.push_back({k, kfold_cv(table, hp, k, rng_seed, standardize)});
    return rows;
}

}  // namespace toolwatch::evaltune
