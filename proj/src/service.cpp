#include "toolwatch/service.hpp"

#include <cstdlib>
#include <iostream>
#include <set>

#include "httplib.h"

namespace toolwatch::service {

namespace {

using nlohmann::json;

Response error_response(int status, const std::string& message, json fields = json::object()) {
    return {status, json{{"error", message}, {"fields", std::move(fields)}}.dump()};
}

json scores_json(const std::array<double, kNumClasses>& scores) {
    json j = json::object();
    for (auto c : kAllConditions) j[std::string(key_name(c))] = scores[severity(c)];
    return j;
}

}  // namespace

int resolve_port(std::optional<int> flag_port) {
    if (flag_port) return *flag_port;
    if (const char* env = std::getenv("TOOLWATCH_PORT"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 0 || v > 65535) throw Error("TOOLWATCH_PORT is not a valid port: " + std::string(env));
        return static_cast<int>(v);
    }
    return kDefaultPort;
}

InferenceService::InferenceService(knn::KnnModel model, std::string model_label)
    : model_(std::move(model)), model_label_(std::move(model_label)) {
    const auto training = model_.training_table();
    const auto global = explain::permutation_importance(model_, training, explain::kDefaultRepeats, kImportanceSeed);
    importance_body_ = explain::global_to_json(global).dump();

    if (model_.dimension() >= 2 && model_.size() >= 3) {
        projection_ = explain::pca_project(training);
        json points = json::array();
        for (std::size_t i = 0; i < projection_.points.size(); ++i) {
            points.push_back({{"x", projection_.points[i][0]},
                              {"y", projection_.points[i][1]},
                              {"label", key_name(model_.labels()[i])}});
        }
        projection_body_ = json{{"feature_names", projection_.feature_names},
                                {"components", projection_.components},
                                {"explained_variance", projection_.explained_variance},
                                {"points", std::move(points)}}
                               .dump();
    } else {
        projection_body_ = json{{"error", "model has too few features or rows for a 2-D projection"}}.dump();
    }
}

InferenceService InferenceService::from_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("model file not found: " + path.string());
    return InferenceService(knn::KnnModel::load(path), path.filename().string());
}

json InferenceService::metadata() const {
    const auto& hp = model_.hyperparameters();
    return {{"name", model_label_},
            {"feature_names", model_.feature_names()},
            {"training_size", model_.size()},
            {"standardized", model_.standardized()},
            {"hyperparameters",
             {{"n_neighbors", hp.n_neighbors},
              {"metric", knn::metric_name(hp.metric)},
              {"weighting", knn::weighting_name(hp.weighting)}}}};
}

Response InferenceService::health() const { return {200, json{{"status", "ok"}, {"model", metadata()}}.dump()}; }

Response InferenceService::predict(const std::string& body) const {
    json req;
    try {
        req = json::parse(body);
    } catch (const json::exception& e) {
        return error_response(400, std::string("request body is not valid JSON: ") + e.what());
    }
    if (!req.is_object()) return error_response(400, "request body must be a JSON object");
    if (!req.contains("features") || !req["features"].is_object()) {
        return error_response(400, "request needs a 'features' object", {{"features", "missing"}});
    }
    const auto& feats = req["features"];

    json field_errors = json::object();
    std::vector<double> x;
    for (const auto& name : model_.feature_names()) {
        if (!feats.contains(name)) {
            field_errors[name] = "missing";
            continue;
        }
        const auto& v = feats[name];
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            field_errors[name] = "not a finite number";
            continue;
        }
        x.push_back(v.get<double>());
    }
    if (!field_errors.empty()) {
        std::string names;
        for (const auto& [k, v] : field_errors.items()) names += (names.empty() ? "" : ", ") + k;
        return error_response(400, "invalid features: " + names, std::move(field_errors));
    }
    const std::set<std::string> model_names(model_.feature_names().begin(), model_.feature_names().end());
    json unknown = json::object();
    for (const auto& [k, v] : feats.items()) {
        if (!model_names.contains(k) && !features::canonical_index(k)) unknown[k] = "unknown feature";
    }
    if (!unknown.empty()) return error_response(422, "unknown feature names", std::move(unknown));

    auto flag = [&](const char* key) {
        return req.contains(key) && req[key].is_boolean() && req[key].get<bool>();
    };
    std::uint64_t seed = kDefaultExplanationSeed;
    if (req.contains("seed")) {
        if (!req["seed"].is_number_unsigned()) return error_response(400, "seed must be a non-negative integer", {{"seed", "invalid"}});
        seed = req["seed"].get<std::uint64_t>();
    }

    const auto p = knn::predict(model_, x);
    json resp;
    resp["condition"] = key_name(p.label);
    resp["condition_display"] = display_name(p.label);
    resp["severity"] = severity(p.label);
    resp["scores"] = scores_json(p.scores);
    if (flag("include_neighbors")) {
        json nbs = json::array();
        for (const auto& nb : p.neighbors) {
            json n{{"index", nb.index},
                   {"distance", nb.distance},
                   {"weight", nb.weight},
                   {"label", key_name(nb.label)}};
            if (!projection_.points.empty()) {
                n["x"] = projection_.points[nb.index][0];
                n["y"] = projection_.points[nb.index][1];
            }
            nbs.push_back(std::move(n));
        }
        resp["neighbors"] = std::move(nbs);
        if (!projection_.points.empty()) {
            const auto q = projection_.project(x);
            resp["query_projection"] = {{"x", q[0]}, {"y", q[1]}};
        }
    }
    if (flag("include_explanation")) {
        const auto e = explain::lime_explain(model_, x, explain::kDefaultLimeSamples,
                                             explain::default_kernel_width(model_.dimension()), seed);
        json coef = json::object();
        const auto& c = e.coefficients[severity(e.predicted_label)];
        for (std::size_t f = 0; f < e.feature_names.size(); ++f) coef[e.feature_names[f]] = c[f];
        resp["explanation"] = {{"label", key_name(e.predicted_label)},
                               {"coefficients", std::move(coef)},
                               {"r_squared", e.r_squared[severity(e.predicted_label)]},
                               {"seed", seed},
                               {"all_classes", explain::local_to_json(e)["classes"]}};
    }
    resp["model"] = metadata();
    return {200, resp.dump()};
}

HttpServer::HttpServer(std::shared_ptr<const InferenceService> service, const std::string& host, int port,
                       std::optional<std::filesystem::path> static_dir)
    : service_(std::move(service)), server_(std::make_unique<httplib::Server>()) {
    auto reply = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    auto svc = service_;
    server_->Get("/health", [svc, reply](const httplib::Request&, httplib::Response& res) { reply(res, svc->health()); });
    server_->Get("/model/importance",
                 [svc, reply](const httplib::Request&, httplib::Response& res) { reply(res, svc->importance()); });
    server_->Get("/model/projection",
                 [svc, reply](const httplib::Request&, httplib::Response& res) { reply(res, svc->projection()); });
    server_->Post("/predict", [svc, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, svc->predict(req.body));
    });
    if (static_dir && !server_->set_mount_point("/", static_dir->string())) {
        throw Error("static directory not found: " + static_dir->string());
    }

    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ < 0) throw Error("cannot bind to " + host);
    } else {
        if (!server_->bind_to_port(host, port)) throw Error("cannot bind to " + host + ":" + std::to_string(port));
        port_ = port;
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::wait() {
    if (thread_.joinable()) thread_.join();
}

void HttpServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace toolwatch::service
