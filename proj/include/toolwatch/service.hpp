#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"

#include "toolwatch/explain.hpp"
#include "toolwatch/knn.hpp"

namespace httplib {
class Server;
}

namespace toolwatch::service {

inline constexpr int kDefaultPort = 8080;
inline constexpr std::uint64_t kDefaultExplanationSeed = 0;
inline constexpr std::uint64_t kImportanceSeed = 0;

/// Port precedence: explicit flag, then TOOLWATCH_PORT, then kDefaultPort.
int resolve_port(std::optional<int> flag_port);

struct Response {
    int status = 200;
    std::string body;  // JSON
};

/// Request handling over one immutable model. Handlers are const and safe to call
/// concurrently; the HTTP layer only routes to them.
class InferenceService {
public:
    explicit InferenceService(knn::KnnModel model, std::string model_label = "model");
    static InferenceService from_file(const std::filesystem::path& path);

    const knn::KnnModel& model() const { return model_; }

    Response health() const;
    Response importance() const { return {200, importance_body_}; }
    Response projection() const { return {200, projection_body_}; }
    Response predict(const std::string& body) const;

private:
    nlohmann::json metadata() const;

    knn::KnnModel model_;
    std::string model_label_;
    explain::Projection2D projection_;
    std::string importance_body_;
    std::string projection_body_;
};

/// Binds and serves on a background thread until destroyed or stop() is called.
class HttpServer {
public:
    HttpServer(std::shared_ptr<const InferenceService> service, const std::string& host, int port,
               std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    int port() const { return port_; }
    void wait();
    void stop();

private:
    std::shared_ptr<const InferenceService> service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace toolwatch::service
