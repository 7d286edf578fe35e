// toolwatch command line driver.
#include <csignal>
#include <iostream>
#include <memory>

#include "CLI11.hpp"

#include "toolwatch/pipeline.hpp"
#include "toolwatch/service.hpp"

using namespace toolwatch;

namespace {

std::map<std::string, double> row_instance(const pipeline::PipelineConfig& config, std::size_t row) {
    const auto table = features::load_csv(config.features_path());
    if (row >= table.size()) {
        throw Error("row " + std::to_string(row) + " out of range (table has " + std::to_string(table.size()) + " rows)");
    }
    std::map<std::string, double> out;
    for (std::size_t j = 0; j < table.dimension(); ++j) out[table.feature_names()[j]] = table[row].values[j];
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"toolwatch: tool wear monitoring with KNN"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out", out_dir, "output directory");

    auto* synth = app.add_subcommand("synth", "generate synthetic labeled signals and a manifest");
    auto* ingest = app.add_subcommand("ingest", "clean, window and extract features from the manifest");

    auto* train = app.add_subcommand("train", "select features and fit a KNN model");
    std::string mode = "vanilla";
    std::optional<double> split;
    train->add_option("--mode", mode)->check(CLI::IsMember({"vanilla", "tuned"}));
    train->add_option("--split", split, "held-out test fraction")->check(CLI::Range(0.0, 0.95));

    auto* explain = app.add_subcommand("explain", "global or local explanations of a model");
    std::optional<std::string> model_path, instance;
    std::optional<std::size_t> row;
    explain->add_option("--model", model_path);
    auto* inst_opt = explain->add_option("--instance", instance, "name=value,... or a JSON file");
    explain->add_option("--row", row, "explain this row of the feature table")->excludes(inst_opt);

    auto* sweep = app.add_subcommand("sweep", "accuracy vs test split and vs K folds");

    auto* serve = app.add_subcommand("serve", "HTTP inference service");
    std::optional<int> port;
    std::string host = "0.0.0.0";
    std::optional<std::string> static_dir;
    serve->add_option("--model", model_path);
    serve->add_option("--port", port)->check(CLI::Range(0, 65535));
    serve->add_option("--host", host);
    serve->add_option("--static", static_dir, "directory served at /");

    CLI11_PARSE(app, argc, argv);

    try {
        pipeline::PipelineConfig config = config_path.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(config_path);
        if (seed) config.seed = *seed;
        if (out_dir) config.out_dir = *out_dir;
        if (model_path) config.model_path = *model_path;

        if (synth->parsed()) {
            pipeline::cmd_synth(config);
        } else if (ingest->parsed()) {
            pipeline::cmd_ingest(config);
        } else if (train->parsed()) {
            if (split) config.test_fraction = *split;
            pipeline::cmd_train(config, mode == "tuned" ? pipeline::TrainMode::tuned : pipeline::TrainMode::vanilla);
        } else if (explain->parsed()) {
            std::map<std::string, double> values;
            if (instance) values = pipeline::parse_instance(*instance);
            if (row) values = row_instance(config, *row);
            pipeline::cmd_explain(config, values);
        } else if (sweep->parsed()) {
            pipeline::cmd_sweep(config);
        } else if (serve->parsed()) {
            auto svc = std::make_shared<const service::InferenceService>(service::InferenceService::from_file(config.model_file()));
            std::optional<std::filesystem::path> dir;
            if (static_dir) dir = *static_dir;
            service::HttpServer server(svc, host, service::resolve_port(port), dir);
            std::cout << "serve: listening on " << host << ':' << server.port() << std::endl;
            server.wait();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
