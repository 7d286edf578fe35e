#include "doctest.h"

#include <cstdlib>
#include <future>

#include "httplib.h"
#include "json.hpp"

#include "fixtures.hpp"
#include "toolwatch/service.hpp"

using namespace toolwatch;
using nlohmann::json;

namespace {

struct Served {
    std::filesystem::path dir = fixture::temp_dir("svc");
    features::FeatureTable table = fixture::dominant_table(40, 5, 77);
    std::shared_ptr<const service::InferenceService> svc;
    std::unique_ptr<service::HttpServer> server;

    Served() {
        knn::fit(table, {4, knn::Metric::manhattan(), knn::Weighting::inverse_distance}, false).save(dir / "model.json");
        svc = std::make_shared<const service::InferenceService>(service::InferenceService::from_file(dir / "model.json"));
        server = std::make_unique<service::HttpServer>(svc, "127.0.0.1", 0);
    }
    ~Served() {
        server->stop();
        std::filesystem::remove_all(dir);
    }
    httplib::Client client() const { return httplib::Client("127.0.0.1", server->port()); }

    json row_request(std::size_t i) const {
        json f = json::object();
        for (std::size_t j = 0; j < table.dimension(); ++j) f[table.feature_names()[j]] = table[i].values[j];
        return {{"features", f}};
    }
};

}  // namespace

TEST_SUITE("service") {
TEST_CASE("health and cached model views") {
    Served s;
    auto cli = s.client();
    const auto h = cli.Get("/health");
    REQUIRE(h);
    CHECK(h->status == 200);
    const auto hj = json::parse(h->body);
    CHECK(hj["model"]["feature_names"].size() == 5);
    CHECK(hj["model"]["training_size"] == 120);
    CHECK(hj["model"]["hyperparameters"]["metric"] == "manhattan");

    const auto a = cli.Get("/model/importance");
    const auto b = cli.Get("/model/importance");
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->body == b->body);
    const auto ij = json::parse(a->body);
    CHECK(ij["importances"].size() == 5);
    CHECK(ij["importances"][0]["feature"] == "mean");

    const auto p = cli.Get("/model/projection");
    REQUIRE(p);
    CHECK(json::parse(p->body)["points"].size() == 120);
}

TEST_CASE("predict returns label, neighbors and explanation") {
    Served s;
    auto cli = s.client();
    auto req = s.row_request(4);
    req["include_neighbors"] = true;
    req["include_explanation"] = true;
    const auto r = cli.Post("/predict", req.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    const auto j = json::parse(r->body);
    CHECK(j["condition"] == key_name(*s.table[4].label));
    CHECK(j["neighbors"].size() == 4);
    CHECK(j["neighbors"][0]["index"] == 4);
    CHECK(j["neighbors"][0].contains("x"));
    CHECK(j["explanation"]["coefficients"].size() == 5);
    CHECK(j["model"]["hyperparameters"]["n_neighbors"] == 4);

    // A full twelve-feature map is accepted; unused canonical names are ignored.
    auto full = s.row_request(4);
    full["features"]["mode"] = 1.0;
    full["features"]["variance"] = 2.0;
    CHECK(cli.Post("/predict", full.dump(), "application/json")->status == 200);
}

TEST_CASE("request validation") {
    Served s;
    auto cli = s.client();
    auto missing = s.row_request(0);
    missing["features"].erase("skewness");
    auto r = cli.Post("/predict", missing.dump(), "application/json");
    CHECK(r->status == 400);
    CHECK(json::parse(r->body)["fields"].contains("skewness"));

    auto bad = s.row_request(0);
    bad["features"]["median"] = "NaN";
    r = cli.Post("/predict", bad.dump(), "application/json");
    CHECK(r->status == 400);
    CHECK(json::parse(r->body)["fields"]["median"] == "not a finite number");

    auto unknown = s.row_request(0);
    unknown["features"]["spindle_speed"] = 1200;
    r = cli.Post("/predict", unknown.dump(), "application/json");
    CHECK(r->status == 422);
    CHECK(json::parse(r->body)["fields"].contains("spindle_speed"));

    CHECK(cli.Post("/predict", "{not json", "application/json")->status == 400);
    CHECK(cli.Post("/predict", "[1,2]", "application/json")->status == 400);
    CHECK(cli.Post("/predict", R"({"features": 3})", "application/json")->status == 400);
    CHECK(cli.Get("/nope")->status == 404);
}

TEST_CASE("concurrent identical requests get identical responses") {
    Served s;
    auto req = s.row_request(17);
    req["include_neighbors"] = true;
    req["include_explanation"] = true;
    req["seed"] = 5;
    const auto body = req.dump();
    const auto reference = s.svc->predict(body).body;

    std::vector<std::future<std::string>> futures;
    for (int i = 0; i < 100; ++i) {
        futures.push_back(std::async(std::launch::async, [&] {
            auto cli = s.client();
            const auto r = cli.Post("/predict", body, "application/json");
            return r && r->status == 200 ? r->body : std::string("failed ") + httplib::to_string(r.error());
        }));
    }
    int same = 0;
    for (auto& f : futures) {
        const auto got = f.get();
        if (got != reference) MESSAGE(got.substr(0, 300));
        same += got == reference;
    }
    CHECK(same == 100);
}

TEST_CASE("responses are stable across restarts") {
    Served s;
    auto req = s.row_request(9);
    req["include_explanation"] = true;
    const auto again = service::InferenceService::from_file(s.dir / "model.json");
    CHECK(again.predict(req.dump()).body == s.svc->predict(req.dump()).body);
    CHECK(again.importance().body == s.svc->importance().body);
}

TEST_CASE("startup errors") {
    CHECK_THROWS_WITH_AS(service::InferenceService::from_file("/no/such/model.json"), doctest::Contains("/no/such/model.json"),
                         Error);
    Served s;
    CHECK_THROWS_WITH_AS(service::HttpServer(s.svc, "127.0.0.1", 0, s.dir / "no-static"), doctest::Contains("no-static"),
                         Error);
}

TEST_CASE("port precedence") {
    ::unsetenv("TOOLWATCH_PORT");
    CHECK(service::resolve_port(std::nullopt) == service::kDefaultPort);
    ::setenv("TOOLWATCH_PORT", "9191", 1);
    CHECK(service::resolve_port(std::nullopt) == 9191);
    CHECK(service::resolve_port(7000) == 7000);
    ::setenv("TOOLWATCH_PORT", "http", 1);
    CHECK_THROWS_AS(service::resolve_port(std::nullopt), Error);
    ::unsetenv("TOOLWATCH_PORT");
}
}
