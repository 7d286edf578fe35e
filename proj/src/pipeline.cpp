#include "toolwatch/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "toolwatch/features.hpp"
#include "toolwatch/svg.hpp"

namespace toolwatch::pipeline {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(out)) {
        throw Error("config: '" + key + "' expects a number, got '" + v + "'");
    }
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d < 0 || d != std::floor(d)) throw Error("config: '" + key + "' expects a non-negative integer");
    return static_cast<std::size_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error("config: '" + key + "' expects true/false");
}

/// Tracks files written by one command; removes them unless committed.
class Outputs {
public:
    explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }
    Outputs(const Outputs&) = delete;
    Outputs& operator=(const Outputs&) = delete;
    ~Outputs() {
        if (committed_) return;
        for (const auto& p : written_) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    }

    /// A file named relative to the output directory.
    std::filesystem::path add(const std::filesystem::path& name) { return track(dir_ / name); }

    /// A file at a caller-resolved path.
    std::filesystem::path track(const std::filesystem::path& p) {
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        written_.push_back(p);
        return p;
    }

    void text(const std::filesystem::path& name, const std::string& content) {
        const auto p = add(name);
        std::ofstream out(p);
        out << content;
        if (!out) throw Error("cannot write " + p.string());
    }

    void commit() { committed_ = true; }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
    bool committed_ = false;
};

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(std::string(name) + ": " + e.what());
    }
}

std::string hp_string(const knn::Hyperparameters& hp) {
    std::ostringstream s;
    s << '(' << hp.n_neighbors << ", " << knn::metric_name(hp.metric) << ", " << knn::weighting_name(hp.weighting)
      << ')';
    return s.str();
}

dataset::ClassParameters parse_class(const std::string& key, const std::string& v) {
    const auto parts = split_list(v);
    if (parts.size() != 4) throw Error("config: '" + key + "' expects mean,std,skew,ar");
    return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2]), to_double(key, parts[3])};
}

/// Evenly spaced row indices used as scatter-plot queries.
std::vector<std::size_t> spread_indices(std::size_t n, std::size_t count) {
    std::vector<std::size_t> out;
    count = std::min(count, n);
    for (std::size_t i = 0; i < count; ++i) out.push_back((2 * i + 1) * n / (2 * count));
    return out;
}

}  // namespace

dataset::GeneratorConfig default_generator() {
    dataset::GeneratorConfig g;
    // Same as fixtures/pipeline.conf. Classes share the mean force level and differ in
    // dispersion and skew; each class is five runs with their own offset.
    g.classes[0] = {150.0, 10.0, 0.0, 0.3};
    g.classes[1] = {150.0, 11.0, 0.35, 0.3};
    g.classes[2] = {150.0, 12.0, 0.7, 0.3};
    g.windows_per_class = 100;
    g.window_length = dataset::kDefaultWindowLength;
    g.rng_seed = 7;
    g.sessions_per_class = 5;
    g.session_mean_spread = 2.0;
    g.session_std_spread = 0.1;
    return g;
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    auto path_of = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };

    std::stringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string v = trim(line.substr(eq + 1));

        if (key == "out") c.out_dir = path_of(v);
        else if (key == "manifest") c.manifest = path_of(v);
        else if (key == "features") c.features_csv = path_of(v);
        else if (key == "model") c.model_path = path_of(v);
        else if (key == "seed") c.seed = to_size(key, v);
        else if (key == "window_length") c.window_length = to_size(key, v);
        else if (key == "stride") c.stride = to_size(key, v);
        else if (key == "z_threshold") c.z_threshold = to_double(key, v);
        else if (key == "augment_target") c.augment_target = to_size(key, v);
        else if (key == "select_k") c.select_k = to_size(key, v);
        else if (key == "tree.max_depth") c.tree_max_depth = to_size(key, v);
        else if (key == "tree.min_samples_split") c.tree_min_samples_split = to_size(key, v);
        else if (key == "standardize") c.standardize = to_bool(key, v);
        else if (key == "test_fraction") c.test_fraction = to_double(key, v);
        else if (key == "grid.n_neighbors") {
            c.grid.n_neighbors.clear();
            for (const auto& s : split_list(v)) c.grid.n_neighbors.push_back(to_size(key, s));
        } else if (key == "grid.metrics") {
            c.grid.metrics.clear();
            for (const auto& s : split_list(v)) c.grid.metrics.push_back(knn::parse_metric(s));
        } else if (key == "grid.weightings") {
            c.grid.weightings.clear();
            for (const auto& s : split_list(v)) c.grid.weightings.push_back(knn::parse_weighting(s));
        } else if (key == "grid.cv_folds") c.grid.cv_folds = to_size(key, v);
        else if (key == "importance.repeats") c.importance_repeats = to_size(key, v);
        else if (key == "lime.samples") c.lime_samples = to_size(key, v);
        else if (key == "lime.kernel_width") c.lime_kernel_width = to_double(key, v);
        else if (key == "scatter.queries") c.scatter_queries = to_size(key, v);
        else if (key == "sweep.fractions") {
            c.sweep_fractions.clear();
            for (const auto& s : split_list(v)) c.sweep_fractions.push_back(to_double(key, s));
        } else if (key == "sweep.k_min") c.sweep_k_min = to_size(key, v);
        else if (key == "sweep.k_max") c.sweep_k_max = to_size(key, v);
        else if (key == "sweep.n_neighbors") c.sweep_hp.n_neighbors = to_size(key, v);
        else if (key == "sweep.metric") c.sweep_hp.metric = knn::parse_metric(v);
        else if (key == "sweep.weighting") c.sweep_hp.weighting = knn::parse_weighting(v);
        else if (key == "synth.windows_per_class") c.synth.windows_per_class = to_size(key, v);
        else if (key == "synth.window_length") c.synth.window_length = to_size(key, v);
        else if (key == "synth.seed") c.synth.rng_seed = to_size(key, v);
        else if (key == "synth.sampling_rate_hz") c.synth.sampling_rate_hz = to_double(key, v);
        else if (key == "synth.sessions_per_class") c.synth.sessions_per_class = to_size(key, v);
        else if (key == "synth.session_mean_spread") c.synth.session_mean_spread = to_double(key, v);
        else if (key == "synth.session_std_spread") c.synth.session_std_spread = to_double(key, v);
        else if (key == "synth.direction") c.synth.direction = dataset::parse_direction(v);
        else if (key == "synth.class0") c.synth.classes[0] = parse_class(key, v);
        else if (key == "synth.class1") c.synth.classes[1] = parse_class(key, v);
        else if (key == "synth.class2") c.synth.classes[2] = parse_class(key, v);
        else throw Error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

void cmd_synth(const PipelineConfig& config) {
    Outputs out(config.out_dir);
    const auto series = stage("synth", [&] { return dataset::synthesize(config.synth); });

    // One file per class: the class's windows concatenated in generation order, so
    // windowing at synth.window_length recovers them exactly.
    std::vector<dataset::ManifestEntry> entries;
    for (ToolCondition label : kAllConditions) {
        dataset::SignalSeries joined;
        joined.direction = config.synth.direction;
        joined.sampling_rate_hz = config.synth.sampling_rate_hz;
        joined.label = label;
        for (const auto& s : series) {
            if (s.label == label) joined.samples.insert(joined.samples.end(), s.samples.begin(), s.samples.end());
        }
        const auto file = out.add(std::filesystem::path("signals") / ("class_" + std::to_string(severity(label)) + ".csv"));
        dataset::save_signal(joined, file);
        entries.push_back({file, config.synth.direction, label});
    }
    const auto manifest = out.track(config.manifest_path());
    for (auto& e : entries) e.path = std::filesystem::relative(e.path, manifest.parent_path());
    dataset::save_manifest(entries, manifest);
    std::cout << "synth: " << series.size() << " windows of " << config.synth.window_length
              << " samples -> " << manifest.string() << '\n';
    out.commit();
}

IngestResult cmd_ingest(const PipelineConfig& config) {
    Outputs out(config.out_dir);
    IngestResult result;
    const auto entries = stage("manifest", [&] { return dataset::load_manifest(config.manifest_path()); });

    std::vector<dataset::Window> windows;
    for (const auto& e : entries) {
        auto series = stage("load", [&] { return dataset::load_signal(e.path, e.direction); });
        series.label = e.label;
        const auto cleaned = stage("clean", [&] { return dataset::remove_outliers(series, config.z_threshold); });
        auto w = stage("window", [&] { return dataset::make_windows(cleaned.series, config.window_length, config.stride); });
        std::cout << "ingest: " << e.path.filename().string() << " samples=" << series.samples.size()
                  << " removed=" << cleaned.removed_count << " windows=" << w.size() << '\n';
        result.removed_samples += cleaned.removed_count;
        windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
        ++result.files;
    }
    result.windows = windows.size();
    if (config.augment_target > 0) {
        windows = stage("augment", [&] { return dataset::augment(windows, config.augment_target, config.seed); });
        std::cout << "ingest: augmented " << result.windows << " -> " << windows.size() << " windows\n";
    }
    const auto table = stage("extract", [&] { return features::build_table(windows); });
    result.rows = table.size();
    features::save_csv(table, out.track(config.features_path()));
    std::cout << "ingest: wrote " << table.size() << " rows to " << config.features_path().string() << '\n';
    out.commit();
    return result;
}

TrainResult cmd_train(const PipelineConfig& config, TrainMode mode) {
    Outputs out(config.out_dir);
    TrainResult result;
    const auto full = stage("load", [&] { return features::load_csv(config.features_path()); });

    const auto tree = stage("select", [&] {
        return dtree::fit_tree(full, {config.tree_max_depth, config.tree_min_samples_split, config.seed});
    });
    const auto ranking = dtree::feature_importance(tree, full);
    dtree::save_ranking_csv(ranking, out.add("feature_ranking.csv"));
    out.text("selection_tree.dot", dtree::export_dot(tree));
    result.selected_features = stage("select", [&] {
        return dtree::select_top_k(ranking, std::min(config.select_k, full.dimension()), full.feature_names());
    });
    const auto table = full.project(result.selected_features);

    features::FeatureTable train = table;
    std::optional<features::FeatureTable> test;
    if (config.test_fraction > 0.0) {
        auto parts = stage("split", [&] { return evaltune::split(table, config.test_fraction, true, config.seed); });
        train = std::move(parts.train);
        test = std::move(parts.test);
    }

    if (mode == TrainMode::tuned) {
        result.grid = stage("grid", [&] { return evaltune::grid_search(train, config.grid, config.seed, Execution::parallel, config.standardize); });
        result.hyperparameters = result.grid->best;
        evaltune::save_grid_csv(*result.grid, out.add("grid_results.csv"));
    } else {
        result.hyperparameters = knn::vanilla_hyperparameters();
    }
    const auto model = stage("fit", [&] { return knn::fit(train, result.hyperparameters, config.standardize); });
    model.save(out.track(config.model_file()));

    auto evaluate = [&](const features::FeatureTable& t, const std::string& name) {
        const auto preds = knn::predict_table(model, t);
        std::vector<ToolCondition> predicted;
        evaltune::ScoredLabels scored;
        scored.actual = t.labels();
        for (const auto& p : preds) {
            predicted.push_back(p.label);
            scored.scores.push_back(explain::score_shares(p));
        }
        const auto cm = evaltune::confusion(scored.actual, predicted);
        const auto report = evaltune::metrics(cm, scored);
        evaltune::save_matrix_csv(cm, out.add("confusion_" + name + ".csv"));
        const auto text = evaltune::render_matrix_text(cm, "Tool health based on " + name + " data");
        out.text("confusion_" + name + ".txt", text);
        std::cout << text;
        return std::make_pair(cm, report);
    };
    std::tie(result.train_matrix, result.train_metrics) = evaluate(train, "train");
    nlohmann::json report;
    report["mode"] = mode == TrainMode::tuned ? "tuned" : "vanilla";
    report["hyperparameters"] = model.to_json()["hyperparameters"];
    report["selected_features"] = result.selected_features;
    report["train"] = evaltune::metrics_to_json(result.train_metrics);
    report["train_rows"] = train.size();
    if (test) {
        auto [cm, m] = evaluate(*test, "test");
        result.test_matrix = cm;
        result.test_metrics = m;
        report["test"] = evaltune::metrics_to_json(m);
        report["test_rows"] = test->size();
    }
    if (result.grid) {
        for (const auto& row : result.grid->rows) {
            if (row.hp == result.grid->best) report["cv_mean"] = row.cv.mean;
        }
    }
    out.text("metrics.json", report.dump(2) + "\n");
    std::cout << "train: mode=" << report["mode"].get<std::string>() << " best=" << hp_string(result.hyperparameters)
              << " features=" << result.selected_features.size() << '\n';
    out.commit();
    return result;
}

std::map<std::string, double> parse_instance(const std::string& text) {
    std::map<std::string, double> out;
    if (std::filesystem::exists(text)) {
        std::ifstream in(text);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error("instance file " + text + " is not valid JSON: " + e.what());
        }
        if (!j.is_object()) throw Error("instance file must hold a JSON object of feature values");
        for (const auto& [k, v] : j.items()) {
            if (!v.is_number()) throw Error("instance feature '" + k + "' is not a number");
            out[k] = v.get<double>();
        }
        return out;
    }
    for (const auto& item : split_list(text)) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Error("malformed instance item '" + item + "' (expected name=value)");
        const auto key = trim(item.substr(0, eq));
        out[key] = to_double(key, trim(item.substr(eq + 1)));
    }
    if (out.empty()) throw Error("empty instance");
    return out;
}

std::vector<double> instance_vector(const knn::KnnModel& model, const std::map<std::string, double>& instance) {
    for (const auto& [k, v] : instance) {
        const bool used = std::find(model.feature_names().begin(), model.feature_names().end(), k) !=
                          model.feature_names().end();
        if (!used && !features::canonical_index(k)) throw Error("unknown feature '" + k + "'");
        if (!std::isfinite(v)) throw Error("feature '" + k + "' is not finite");
    }
    std::vector<double> x;
    for (const auto& name : model.feature_names()) {
        const auto it = instance.find(name);
        if (it == instance.end()) throw Error("instance is missing feature '" + name + "'");
        x.push_back(it->second);
    }
    return x;
}

ExplainResult cmd_explain(const PipelineConfig& config, const std::map<std::string, double>& instance) {
    Outputs out(config.out_dir);
    ExplainResult result;
    const auto model = stage("model", [&] { return knn::KnnModel::load(config.model_file()); });

    if (!instance.empty()) {
        const auto x = stage("instance", [&] { return instance_vector(model, instance); });
        result.prediction = knn::predict(model, x);
        const double width = config.lime_kernel_width > 0 ? config.lime_kernel_width
                                                          : explain::default_kernel_width(model.dimension());
        result.local = stage("lime", [&] { return explain::lime_explain(model, x, config.lime_samples, width, config.seed); });
        auto j = explain::local_to_json(*result.local);
        j["scores"] = result.prediction->scores;
        out.text("local_explanation.json", j.dump(2) + "\n");
        const auto& coef = result.local->coefficients[severity(result.local->predicted_label)];
        out.text("local_explanation.svg",
                 svg::signed_bar_chart(model.feature_names(), coef,
                                       "Local explanation: " + std::string(display_name(result.local->predicted_label))));
        std::cout << "explain: predicted " << display_name(result.prediction->label) << '\n';
        out.commit();
        return result;
    }

    features::FeatureTable table = std::filesystem::exists(config.features_path())
                                       ? model.align(features::load_csv(config.features_path()))
                                       : model.training_table();
    result.global = stage("importance", [&] {
        return explain::permutation_importance(model, table, config.importance_repeats, config.seed);
    });
    explain::save_global_csv(*result.global, out.add("global_importance.csv"));
    out.text("global_importance.txt", explain::render_global_text(*result.global));
    std::cout << explain::render_global_text(*result.global);

    const auto training = model.training_table();
    const auto projection = stage("pca", [&] { return explain::pca_project(training); });
    std::vector<std::vector<double>> queries;
    for (std::size_t i : spread_indices(table.size(), config.scatter_queries)) queries.push_back(table[i].values);
    const auto plot = explain::neighbor_plot_data(model, queries, projection);
    explain::save_plot_csv(plot, out.add("scatter.csv"));
    out.text("scatter.svg", svg::neighbor_scatter(plot, "KNN neighbors in PCA space"));

    const auto tree = dtree::fit_tree(table, {config.tree_max_depth, config.tree_min_samples_split, config.seed});
    out.text("explain_tree.dot", dtree::export_dot(tree));
    out.commit();
    return result;
}

SweepResult cmd_sweep(const PipelineConfig& config) {
    Outputs out(config.out_dir);
    SweepResult result;
    const auto full = stage("load", [&] { return features::load_csv(config.features_path()); });
    features::FeatureTable table = full;
    if (config.select_k < full.dimension()) {
        const auto tree = dtree::fit_tree(full, {config.tree_max_depth, config.tree_min_samples_split, config.seed});
        table = full.project(dtree::select_top_k(dtree::feature_importance(tree, full), config.select_k, full.feature_names()));
    }

    result.split_rows = stage("split sweep", [&] {
        return evaltune::split_sweep(table, config.sweep_hp, config.sweep_fractions, config.seed, config.standardize);
    });
    result.kfold_rows = stage("kfold sweep", [&] {
        return evaltune::kfold_sweep(table, config.sweep_hp, config.sweep_k_min, config.sweep_k_max, config.seed,
                                     config.standardize);
    });

    {
        std::ostringstream csv;
        csv << "test_fraction,train_accuracy,test_accuracy\n" << std::setprecision(17);
        svg::LineSeries train{"train", {}, {}}, test{"test", {}, {}};
        for (const auto& r : result.split_rows) {
            csv << r.test_fraction << ',' << r.train_accuracy << ',' << r.test_accuracy << '\n';
            train.x.push_back(r.test_fraction);
            train.y.push_back(r.train_accuracy);
            test.x.push_back(r.test_fraction);
            test.y.push_back(r.test_accuracy);
        }
        out.text("sweep_split.csv", csv.str());
        out.text("sweep_split.svg", svg::line_chart({train, test}, "Training and testing accuracy vs test split",
                                                    "test fraction", "accuracy"));
    }
    {
        std::ostringstream csv;
        csv << "k,cv_mean,cv_std\n" << std::setprecision(17);
        svg::LineSeries mean{"cv mean", {}, {}};
        for (const auto& r : result.kfold_rows) {
            csv << r.k << ',' << r.cv.mean << ',' << r.cv.stddev << '\n';
            mean.x.push_back(static_cast<double>(r.k));
            mean.y.push_back(r.cv.mean);
        }
        out.text("sweep_kfold.csv", csv.str());
        out.text("sweep_kfold.svg", svg::line_chart({mean}, "Cross-validated accuracy vs K", "K (folds)", "accuracy"));
    }
    std::cout << "sweep: " << result.split_rows.size() << " split rows, " << result.kfold_rows.size()
              << " k-fold rows\n";
    out.commit();
    return result;
}

}  // namespace toolwatch::pipeline
