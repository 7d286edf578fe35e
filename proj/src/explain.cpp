#include "toolwatch/explain.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "toolwatch/evaltune.hpp"
#include "parallel.hpp"

namespace toolwatch::explain {

namespace {

std::vector<double> column_std(const knn::KnnModel& model) {
    const std::size_t d = model.dimension();
    std::vector<double> mean(d, 0.0), ss(d, 0.0);
    const double n = static_cast<double>(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto r = model.raw(i);
        for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / n;
    }
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto r = model.raw(i);
        for (std::size_t j = 0; j < d; ++j) ss[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
    }
    for (double& v : ss) v = std::sqrt(v / n);
    return ss;
}

std::size_t hits(std::span<const ToolCondition> actual, std::span<const knn::Prediction> p) {
    std::size_t h = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) h += actual[i] == p[i].label;
    return h;
}

}  // namespace

GlobalExplanation permutation_importance(const knn::KnnModel& model, const features::FeatureTable& table,
                                         std::size_t repeats, std::uint64_t rng_seed, Execution exec) {
    if (repeats < 2) throw Error("permutation_importance: repeats must be at least 2");
    if (table.empty()) throw Error("permutation_importance: empty table");
    if (!table.fully_labeled()) throw Error("permutation_importance: table has unlabeled rows");

    const auto aligned = model.align(table);
    const auto actual = aligned.labels();
    const std::size_t n = aligned.size();
    const std::size_t d = aligned.dimension();
    std::vector<std::vector<double>> rows;
    rows.reserve(n);
    for (const auto& r : aligned.rows()) rows.push_back(r.values);

    const double nd = static_cast<double>(n);
    const double baseline = static_cast<double>(hits(actual, knn::predict_batch(model, rows, exec))) / nd;

    std::vector<std::vector<double>> drops(d, std::vector<double>(repeats));
    detail::for_each_index(d, exec, [&](std::size_t j) {
        std::seed_seq seq{static_cast<std::uint64_t>(rng_seed), static_cast<std::uint64_t>(j)};
        std::mt19937_64 rng(seq);
        std::vector<double> column(n);
        for (std::size_t i = 0; i < n; ++i) column[i] = rows[i][j];
        auto shuffled_rows = rows;
        for (std::size_t r = 0; r < repeats; ++r) {
            std::shuffle(column.begin(), column.end(), rng);
            for (std::size_t i = 0; i < n; ++i) shuffled_rows[i][j] = column[i];
            const auto p = knn::predict_batch(model, shuffled_rows, Execution::serial);
            drops[j][r] = baseline - static_cast<double>(hits(actual, p)) / nd;
        }
    });

    GlobalExplanation g;
    g.baseline_accuracy = baseline;
    g.repeats = repeats;
    for (std::size_t j = 0; j < d; ++j) {
        const double mean = std::accumulate(drops[j].begin(), drops[j].end(), 0.0) / static_cast<double>(repeats);
        double ss = 0.0;
        for (double v : drops[j]) ss += (v - mean) * (v - mean);
        g.entries.push_back({aligned.feature_names()[j], mean, std::sqrt(ss / static_cast<double>(repeats))});
    }
    std::stable_sort(g.entries.begin(), g.entries.end(),
                     [](const auto& a, const auto& b) { return a.mean > b.mean; });
    return g;
}

std::string render_global_text(const GlobalExplanation& g) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "Weight            | Feature\n";
    for (const auto& e : g.entries) out << e.mean << " ± " << e.stddev << " | " << e.feature << '\n';
    return out.str();
}

void save_global_csv(const GlobalExplanation& g, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "feature,mean,std\n" << std::setprecision(17);
    for (const auto& e : g.entries) out << e.feature << ',' << e.mean << ',' << e.stddev << '\n';
}

nlohmann::json global_to_json(const GlobalExplanation& g) {
    nlohmann::json j;
    j["baseline_accuracy"] = g.baseline_accuracy;
    j["repeats"] = g.repeats;
    auto entries = nlohmann::json::array();
    for (const auto& e : g.entries) entries.push_back({{"feature", e.feature}, {"mean", e.mean}, {"std", e.stddev}});
    j["importances"] = std::move(entries);
    return j;
}

std::array<double, kNumClasses> score_shares(const knn::Prediction& p) {
    const double total = std::accumulate(p.scores.begin(), p.scores.end(), 0.0);
    std::array<double, kNumClasses> out{};
    if (total <= 0.0) return out;
    for (std::size_t c = 0; c < kNumClasses; ++c) out[c] = p.scores[c] / total;
    return out;
}

LocalExplanation lime_explain(const knn::KnnModel& model, std::span<const double> instance,
                              std::size_t n_samples, double kernel_width, std::uint64_t rng_seed) {
    if (instance.size() != model.dimension()) {
        throw Error("lime_explain: instance has " + std::to_string(instance.size()) +
                    " features, model expects " + std::to_string(model.dimension()));
    }
    const auto predicted = knn::predict(model, instance).label;
    ScoreFunction score = [&model](std::span<const double> x) { return score_shares(knn::predict(model, x)); };
    return lime_explain(score, model.feature_names(), instance, column_std(model), predicted, n_samples,
                        kernel_width, rng_seed);
}

LocalExplanation lime_explain(const ScoreFunction& score, std::span<const std::string> names,
                              std::span<const double> instance, std::span<const double> feature_std,
                              ToolCondition predicted, std::size_t n_samples, double kernel_width,
                              std::uint64_t rng_seed) {
    if (n_samples < 50) throw Error("lime_explain: n_samples must be at least 50");
    if (!(kernel_width > 0.0)) throw Error("lime_explain: kernel_width must be positive");
    const std::size_t d = instance.size();
    if (names.size() != d || feature_std.size() != d) throw Error("lime_explain: dimension mismatch");
    for (double v : instance) {
        if (!std::isfinite(v)) throw Error("lime_explain: instance has a non-finite value");
    }

    // Row 0 is the instance itself; the rest are Gaussian perturbations in std units.
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(d));
    for (std::size_t s = 1; s < n_samples; ++s) {
        for (std::size_t j = 0; j < d; ++j) {
            z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = feature_std[j] > 0.0 ? gauss(rng) : 0.0;
        }
    }

    std::vector<std::array<double, kNumClasses>> targets(n_samples);
    detail::for_each_index(n_samples, Execution::parallel, [&](std::size_t s) {
        std::vector<double> x(d);
        for (std::size_t j = 0; j < d; ++j) {
            x[j] = instance[j] + z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) * feature_std[j];
        }
        targets[s] = score(x);
    });

    Eigen::VectorXd w(static_cast<Eigen::Index>(n_samples));
    const double kw2 = kernel_width * kernel_width;
    for (Eigen::Index s = 0; s < w.size(); ++s) w(s) = std::exp(-z.row(s).squaredNorm() / kw2);
    if (w.tail(w.size() - 1).sum() < 1e-6) {
        throw Error("lime_explain: all perturbation weights vanish; use a larger kernel_width");
    }

    Eigen::MatrixXd X(z.rows(), z.cols() + 1);
    X.col(0).setOnes();
    X.rightCols(z.cols()) = z;
    Eigen::MatrixXd gram = X.transpose() * w.asDiagonal() * X;
    for (Eigen::Index j = 1; j < gram.rows(); ++j) gram(j, j) += kLimeRidge;
    const Eigen::LDLT<Eigen::MatrixXd> solver(gram);

    LocalExplanation e;
    e.feature_names.assign(names.begin(), names.end());
    e.instance.assign(instance.begin(), instance.end());
    e.predicted_label = predicted;
    e.kernel_width = kernel_width;
    e.n_samples = n_samples;
    const double wsum = w.sum();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        Eigen::VectorXd y(static_cast<Eigen::Index>(n_samples));
        for (Eigen::Index s = 0; s < y.size(); ++s) y(s) = targets[static_cast<std::size_t>(s)][c];
        const Eigen::VectorXd beta = solver.solve(X.transpose() * w.asDiagonal() * y);

        e.intercepts[c] = beta(0);
        e.coefficients[c].assign(beta.data() + 1, beta.data() + beta.size());
        const double ybar = w.dot(y) / wsum;
        const Eigen::VectorXd resid = y - X * beta;
        const double ss_res = w.dot(resid.cwiseProduct(resid));
        const double ss_tot = w.dot((y.array() - ybar).square().matrix());
        e.r_squared[c] = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    }
    return e;
}

nlohmann::json local_to_json(const LocalExplanation& e) {
    nlohmann::json j;
    j["predicted_label"] = key_name(e.predicted_label);
    j["kernel_width"] = e.kernel_width;
    j["n_samples"] = e.n_samples;
    auto instance = nlohmann::json::object();
    for (std::size_t f = 0; f < e.feature_names.size(); ++f) instance[e.feature_names[f]] = e.instance[f];
    j["instance"] = std::move(instance);
    auto classes = nlohmann::json::object();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        auto coef = nlohmann::json::object();
        for (std::size_t f = 0; f < e.feature_names.size(); ++f) coef[e.feature_names[f]] = e.coefficients[c][f];
        classes[std::string(key_name(static_cast<ToolCondition>(c)))] = {
            {"coefficients", std::move(coef)}, {"intercept", e.intercepts[c]}, {"r_squared", e.r_squared[c]}};
    }
    j["classes"] = std::move(classes);
    return j;
}

std::array<double, 2> Projection2D::project(std::span<const double> raw) const {
    if (raw.size() != center.size()) throw Error("projection: dimension mismatch");
    std::array<double, 2> out{};
    for (std::size_t j = 0; j < raw.size(); ++j) {
        const double zj = (raw[j] - center[j]) / scale[j];
        out[0] += zj * components[0][j];
        out[1] += zj * components[1][j];
    }
    return out;
}

Projection2D pca_project(const features::FeatureTable& table) {
    const std::size_t n = table.size();
    const std::size_t d = table.dimension();
    if (n < 3) throw Error("pca_project: need at least 3 rows");
    if (d < 2) throw Error("pca_project: need at least 2 features");

    Projection2D p;
    p.feature_names = table.feature_names();
    p.center.assign(d, 0.0);
    p.scale.assign(d, 0.0);
    for (const auto& r : table.rows()) {
        for (std::size_t j = 0; j < d; ++j) p.center[j] += r.values[j] / static_cast<double>(n);
    }
    for (const auto& r : table.rows()) {
        for (std::size_t j = 0; j < d; ++j) p.scale[j] += (r.values[j] - p.center[j]) * (r.values[j] - p.center[j]);
    }
    for (double& s : p.scale) {
        s = std::sqrt(s / static_cast<double>(n));
        if (!(s > 0.0)) s = 1.0;
    }

    Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (table[i].values[j] - p.center[j]) / p.scale[j];
        }
    }
    const Eigen::MatrixXd cov = (Z.transpose() * Z) / static_cast<double>(n - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("pca_project: eigendecomposition failed");

    const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
    const double trace = cov.trace();
    const Eigen::Index last = values.size() - 1;
    if (!(trace > 0.0) || values(last - 1) <= 1e-10 * values(last)) {
        throw Error("pca_project: data has rank below 2");
    }
    for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd v = eig.eigenvectors().col(last - c);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        p.components[static_cast<std::size_t>(c)].assign(v.data(), v.data() + v.size());
        p.explained_variance[static_cast<std::size_t>(c)] = std::clamp(values(last - c) / trace, 0.0, 1.0);
    }
    p.points.reserve(n);
    for (const auto& r : table.rows()) {
        p.points.push_back(p.project(r.values));
        p.labels.push_back(r.label);
    }
    return p;
}

NeighborPlotData neighbor_plot_data(const knn::KnnModel& model, std::span<const std::vector<double>> queries,
                                    const Projection2D& projection) {
    if (projection.feature_names != model.feature_names()) {
        throw Error("neighbor_plot_data: projection features differ from the model's");
    }
    NeighborPlotData data;
    data.training_points.reserve(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
        data.training_points.push_back(projection.project(model.raw(i)));
        data.training_labels.push_back(model.labels()[i]);
    }
    const auto predictions = knn::predict_batch(model, queries);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto at = projection.project(queries[q]);
        data.query_points.push_back(at);
        data.query_predictions.push_back(predictions[q].label);
        for (const auto& nb : predictions[q].neighbors) {
            data.segments.push_back({q, nb.index, at, data.training_points[nb.index]});
        }
    }
    return data;
}

void save_plot_csv(const NeighborPlotData& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "kind,id,x,y,label,target_id,target_x,target_y\n" << std::setprecision(12);
    for (std::size_t i = 0; i < data.training_points.size(); ++i) {
        out << "train," << i << ',' << data.training_points[i][0] << ',' << data.training_points[i][1] << ','
            << severity(data.training_labels[i]) << ",,,\n";
    }
    for (std::size_t q = 0; q < data.query_points.size(); ++q) {
        out << "query," << q << ',' << data.query_points[q][0] << ',' << data.query_points[q][1] << ','
            << severity(data.query_predictions[q]) << ",,,\n";
    }
    for (const auto& s : data.segments) {
        out << "segment," << s.query << ',' << s.from[0] << ',' << s.from[1] << ",," << s.training_index << ','
            << s.to[0] << ',' << s.to[1] << '\n';
    }
}

}  // namespace toolwatch::explain
