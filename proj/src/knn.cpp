#include "toolwatch/knn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "parallel.hpp"

namespace toolwatch::knn {

Metric Metric::minkowski(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw Error("minkowski p must be a finite value >= 1");
    return {MetricKind::minkowski, p};
}

std::string metric_name(const Metric& m) {
    switch (m.kind) {
        case MetricKind::manhattan: return "manhattan";
        case MetricKind::euclidean: return "euclidean";
        case MetricKind::cosine: return "cosine";
        case MetricKind::minkowski: {
            std::ostringstream s;
            s << "minkowski:" << m.p;
            return s.str();
        }
    }
    return "?";
}

std::string_view weighting_name(Weighting w) {
    return w == Weighting::uniform ? "uniform" : "inverse_distance";
}

Metric parse_metric(std::string_view text) {
    if (text == "manhattan" || text == "l1") return Metric::manhattan();
    if (text == "euclidean" || text == "l2") return Metric::euclidean();
    if (text == "cosine") return Metric::cosine();
    if (text == "minkowski") return Metric::minkowski(3.0);
    if (text.starts_with("minkowski:")) {
        const std::string p(text.substr(10));
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(p, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != p.size()) throw Error("bad minkowski exponent '" + p + "'");
        return Metric::minkowski(value);
    }
    throw Error("unknown metric '" + std::string(text) + "'");
}

Weighting parse_weighting(std::string_view text) {
    if (text == "uniform") return Weighting::uniform;
    if (text == "inverse_distance" || text == "distance") return Weighting::inverse_distance;
    throw Error("unknown weighting '" + std::string(text) + "'");
}

void Hyperparameters::validate() const {
    if (n_neighbors < 1) throw Error("n_neighbors must be at least 1");
    if (metric.kind == MetricKind::minkowski && !(metric.p >= 1.0)) {
        throw Error("minkowski p must be >= 1");
    }
}

double distance(std::span<const double> a, std::span<const double> b, const Metric& metric) {
    if (a.size() != b.size()) {
        throw Error("distance: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
    }
    const std::size_t n = a.size();
    switch (metric.kind) {
        case MetricKind::manhattan: {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += std::abs(a[i] - b[i]);
            return s;
        }
        case MetricKind::euclidean: {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
            return std::sqrt(s);
        }
        case MetricKind::minkowski: {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += std::pow(std::abs(a[i] - b[i]), metric.p);
            return std::pow(s, 1.0 / metric.p);
        }
        case MetricKind::cosine: {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                dot += a[i] * b[i];
                na += a[i] * a[i];
                nb += b[i] * b[i];
            }
            if (na == 0.0 || nb == 0.0) throw Error("cosine distance undefined for a zero vector");
            if (std::equal(a.begin(), a.end(), b.begin())) return 0.0;
            const double d = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
            // parallel vectors: rounding leaves a few ulps either side of zero
            if (d < kCosineSnap) return 0.0;
            return std::min(d, 2.0);
        }
    }
    return 0.0;
}

std::span<const double> KnnModel::stored(std::size_t i) const {
    const std::size_t d = dimension();
    return std::span<const double>(vectors_).subspan(i * d, d);
}

std::vector<double> KnnModel::raw(std::size_t i) const {
    auto s = stored(i);
    std::vector<double> out(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) out[j] = s[j] * scales_[j] + means_[j];
    return out;
}

std::vector<double> KnnModel::scale(std::span<const double> raw_values) const {
    if (raw_values.size() != dimension()) {
        throw Error("query has " + std::to_string(raw_values.size()) + " features, model expects " +
                    std::to_string(dimension()));
    }
    std::vector<double> out(raw_values.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = (raw_values[j] - means_[j]) / scales_[j];
    return out;
}

features::FeatureTable KnnModel::align(const features::FeatureTable& table) const {
    return table.project(names_);
}

features::FeatureTable KnnModel::training_table() const {
    features::FeatureTable t(names_);
    for (std::size_t i = 0; i < size(); ++i) t.add_row(raw(i), labels_[i]);
    return t;
}

KnnModel fit(const features::FeatureTable& table, const Hyperparameters& hp, bool standardize) {
    hp.validate();
    if (table.empty()) throw Error("fit: empty table");
    if (table.size() < hp.n_neighbors) {
        throw Error("fit: " + std::to_string(table.size()) + " rows is fewer than n_neighbors = " +
                    std::to_string(hp.n_neighbors));
    }
    const auto labels = table.labels();
    const std::size_t n = table.size();
    const std::size_t d = table.dimension();

    std::vector<std::size_t> keep;
    std::vector<double> means(d, 0.0), scales(d, 1.0);
    KnnModel model;
    if (standardize) {
        for (std::size_t j = 0; j < d; ++j) {
            double mean = 0.0;
            for (const auto& r : table.rows()) mean += r.values[j];
            mean /= static_cast<double>(n);
            double ss = 0.0;
            for (const auto& r : table.rows()) ss += (r.values[j] - mean) * (r.values[j] - mean);
            means[j] = mean;
            scales[j] = std::sqrt(ss / static_cast<double>(n));
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        if (standardize && !(scales[j] > 0.0)) {
            std::cerr << "warning: dropping zero-variance feature '" << table.feature_names()[j]
                      << "'\n";
            model.dropped_.push_back(table.feature_names()[j]);
            continue;
        }
        keep.push_back(j);
    }
    if (keep.empty()) throw Error("fit: every feature has zero variance");

    model.hp_ = hp;
    model.standardized_ = standardize;
    for (std::size_t j : keep) {
        model.names_.push_back(table.feature_names()[j]);
        model.means_.push_back(means[j]);
        model.scales_.push_back(scales[j]);
    }
    model.vectors_.reserve(n * keep.size());
    for (const auto& r : table.rows()) {
        for (std::size_t jj = 0; jj < keep.size(); ++jj) {
            const std::size_t j = keep[jj];
            model.vectors_.push_back((r.values[j] - model.means_[jj]) / model.scales_[jj]);
        }
    }
    model.labels_ = labels;
    return model;
}

Prediction predict(const KnnModel& model, std::span<const double> x) {
    const auto query = model.scale(x);
    const auto& hp = model.hyperparameters();
    const std::size_t n = model.size();
    const std::size_t k = hp.n_neighbors;

    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = {distance(query, model.stored(i), hp.metric), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    Prediction p;
    p.neighbors.reserve(k);
    const bool exact_match = hp.weighting == Weighting::inverse_distance && dist[0].first == 0.0;
    for (std::size_t r = 0; r < k; ++r) {
        Neighbor nb;
        nb.index = dist[r].second;
        nb.distance = dist[r].first;
        nb.label = model.labels()[nb.index];
        if (hp.weighting == Weighting::uniform) {
            nb.weight = 1.0;
        } else if (exact_match) {
            nb.weight = nb.distance == 0.0 ? 1.0 : 0.0;
        } else {
            nb.weight = 1.0 / nb.distance;
        }
        p.scores[severity(nb.label)] += nb.weight;
        p.neighbors.push_back(nb);
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
        if (p.scores[c] > p.scores[best]) best = c;
    }
    p.label = static_cast<ToolCondition>(best);
    return p;
}

std::vector<Prediction> predict_batch(const KnnModel& model, std::span<const std::vector<double>> rows,
                                      Execution exec) {
    for (const auto& r : rows) {
        if (r.size() != model.dimension()) {
            throw Error("predict_batch: row has " + std::to_string(r.size()) +
                        " features, model expects " + std::to_string(model.dimension()));
        }
    }
    std::vector<Prediction> out(rows.size());
    detail::for_each_index(rows.size(), exec, [&](std::size_t i) { out[i] = predict(model, rows[i]); });
    return out;
}

std::vector<Prediction> predict_table(const KnnModel& model, const features::FeatureTable& table,
                                      Execution exec) {
    const auto aligned = model.align(table);
    std::vector<std::vector<double>> rows;
    rows.reserve(aligned.size());
    for (const auto& r : aligned.rows()) rows.push_back(r.values);
    return predict_batch(model, rows, exec);
}

nlohmann::json KnnModel::to_json() const {
    nlohmann::json j;
    j["format"] = "toolwatch-knn-model";
    j["version"] = kModelFormatVersion;
    j["hyperparameters"] = {{"n_neighbors", hp_.n_neighbors},
                            {"metric", metric_name(hp_.metric)},
                            {"weighting", weighting_name(hp_.weighting)}};
    j["feature_names"] = names_;
    j["dropped_features"] = dropped_;
    j["standardized"] = standardized_;
    j["means"] = means_;
    j["scales"] = scales_;
    std::vector<int> labels;
    labels.reserve(labels_.size());
    for (auto l : labels_) labels.push_back(static_cast<int>(severity(l)));
    j["labels"] = labels;
    auto vectors = nlohmann::json::array();
    for (std::size_t i = 0; i < size(); ++i) {
        auto s = stored(i);
        vectors.push_back(std::vector<double>(s.begin(), s.end()));
    }
    j["vectors"] = std::move(vectors);
    return j;
}

KnnModel KnnModel::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "toolwatch-knn-model") throw Error("not a toolwatch model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw Error("unsupported model format version " + std::to_string(version));
        }
        KnnModel m;
        const auto& hp = j.at("hyperparameters");
        m.hp_.n_neighbors = hp.at("n_neighbors").get<std::size_t>();
        m.hp_.metric = parse_metric(hp.at("metric").get<std::string>());
        m.hp_.weighting = parse_weighting(hp.at("weighting").get<std::string>());
        m.hp_.validate();
        m.names_ = j.at("feature_names").get<std::vector<std::string>>();
        m.dropped_ = j.value("dropped_features", std::vector<std::string>{});
        m.standardized_ = j.at("standardized").get<bool>();
        m.means_ = j.at("means").get<std::vector<double>>();
        m.scales_ = j.at("scales").get<std::vector<double>>();
        const std::size_t d = m.names_.size();
        if (d == 0 || m.means_.size() != d || m.scales_.size() != d) {
            throw Error("model scaling statistics do not match the feature list");
        }
        for (int l : j.at("labels").get<std::vector<int>>()) {
            m.labels_.push_back(condition_from_severity(l));
        }
        const auto& vectors = j.at("vectors");
        if (vectors.size() != m.labels_.size()) throw Error("model vector and label counts differ");
        m.vectors_.reserve(vectors.size() * d);
        for (const auto& v : vectors) {
            auto row = v.get<std::vector<double>>();
            if (row.size() != d) throw Error("model vector has the wrong dimension");
            m.vectors_.insert(m.vectors_.end(), row.begin(), row.end());
        }
        if (m.labels_.size() < m.hp_.n_neighbors) throw Error("model has fewer rows than n_neighbors");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed model file: ") + e.what());
    }
}

void KnnModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model " + path.string());
    out << to_json().dump() << '\n';
    if (!out) throw Error("write failed for " + path.string());
}

KnnModel KnnModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read model file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("model file " + path.string() + " is not valid JSON: " + e.what());
    }
    try {
        return from_json(j);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

}  // namespace toolwatch::knn
