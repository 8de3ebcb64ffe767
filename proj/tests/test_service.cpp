#include <doctest.h>

#include <algorithm>
#include <future>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "pinnbridge/data.hpp"
#include "pinnbridge/error.hpp"
#include "pinnbridge/image.hpp"
#include "pinnbridge/params_json.hpp"
#include "pinnbridge/service.hpp"

using namespace pinnbridge;
using namespace pinnbridge::service;
using nlohmann::json;

namespace {

std::shared_ptr<const models::Regressor> tiny_model() {
    auto m = models::make_model(models::Arch::Pinn, 7);
    const auto ds = data::synthesize(1, 20);
    m->stats = standardize_fit(ds.features());
    m->target = {30.0, 10.0};
    m->trained = true;
    return std::shared_ptr<const models::Regressor>(std::move(m));
}

const json kMetrics = {{"mae", 2.5}, {"r2", 0.95}, {"rmse", 3.1}};

Service loaded(ServiceConfig cfg = {}) {
    Service s(cfg);
    s.add_model({"ref", tiny_model(), kMetrics, {}});
    return s;
}

json default_body() { return params_to_json(fixtures::default_bridge()); }

std::string png_of(const std::string& truss) {
    for (const auto& c : fixtures::truss_cases())
        if (c.name == truss) {
            const auto bytes = vision::encode_png(vision::render_truss(c.drawing).image);
            return {bytes.begin(), bytes.end()};
        }
    return {};
}

std::string blank_png() {
    const auto bytes = vision::encode_png(vision::RgbImage(200, 150));
    return {bytes.begin(), bytes.end()};
}

json design(const std::string& name, int beams, double length) {
    auto p = fixtures::default_bridge();
    p.geometry.beam_count = beams;
    p.geometry.beam_lengths_mm.assign(static_cast<std::size_t>(beams), length);
    return {{"name", name}, {"parameters", params_to_json(p)}};
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("predict without a model is unavailable") {
    Service s;
    CHECK(s.predict(default_body().dump()).status == 503);
    CHECK(s.compare("[]").status == 503);
}

TEST_CASE("predict returns weight, band and residuals") {
    const auto s = loaded();
    const auto r = s.predict(default_body().dump());
    REQUIRE(r.status == 200);
    const auto j = json::parse(r.body);
    CHECK(std::isfinite(j.at("weight_g").get<double>()));
    CHECK(j.at("error_band_g") == 2.5);
    CHECK(j.at("model_id") == "ref");
    CHECK(j.at("arch") == "pinn");
    CHECK(j.at("physics_residuals").at("terms").size() == 3);
    CHECK(j.at("warnings").empty());

    const json wrapped = {{"model_id", "ref"}, {"parameters", default_body()}};
    CHECK(s.predict(wrapped.dump()).body == r.body);
}

TEST_CASE("predict input errors") {
    const auto s = loaded();
    auto body = default_body();
    body["beam_count"] = 0;
    const auto r = s.predict(body.dump());
    CHECK(r.status == 400);
    CHECK(json::parse(r.body).at("message").get<std::string>().find("beam_count") != std::string::npos);

    CHECK(s.predict("{not json").status == 400);
    CHECK(json::parse(s.predict("{not json").body).at("error") == "ParseError");

    json unknown = {{"model_id", "nope"}, {"parameters", default_body()}};
    CHECK(s.predict(unknown.dump()).status == 400);

    body = default_body();
    body["beam_diameter_mm"] = 2.4;
    const auto warned = json::parse(s.predict(body.dump()).body);
    CHECK(warned.at("warnings").size() == 1);
}

TEST_CASE("extract statuses") {
    ServiceConfig cfg;
    cfg.max_upload_bytes = 1 << 20;
    const auto s = loaded(cfg);

    const auto ok = s.extract({png_of("triangle"), "0.5"});
    REQUIRE(ok.status == 200);
    const auto j = json::parse(ok.body);
    CHECK(j.at("beam_count") == 3);
    // The embedded parameters are accepted by predict as-is.
    CHECK(s.predict(j.at("parameters").dump()).status == 200);

    CHECK(s.extract({blank_png(), "0.5"}).status == 422);
    CHECK(s.extract({png_of("triangle"), std::nullopt}).status == 400);
    CHECK(s.extract({png_of("triangle"), "-1"}).status == 400);
    CHECK(s.extract({png_of("triangle"), "abc"}).status == 400);
    CHECK(s.extract({std::nullopt, "0.5"}).status == 400);
    CHECK(s.extract({std::string("not an image"), "0.5"}).status == 400);
    CHECK(s.extract({std::string((1 << 20) + 1, 'x'), "0.5"}).status == 413);
}

TEST_CASE("compare sorts ascending and keeps names") {
    const auto s = loaded();
    const json same = {design("first", 20, 50), design("second", 20, 50)};
    const auto r = s.compare(same.dump());
    REQUIRE(r.status == 200);
    const auto d = json::parse(r.body).at("designs");
    CHECK(d[0].at("name") == "first");
    CHECK(d[1].at("name") == "second");
    CHECK(d[0].at("weight_g") == d[1].at("weight_g"));

    json many = json::array();
    Rng rng(5);
    for (int i = 0; i < 12; ++i)
        many.push_back(design("d" + std::to_string(i), 10 + static_cast<int>(uniform_index(rng, 40)),
                              uniform(rng, 30.0, 150.0)));
    const auto sorted = json::parse(s.compare(json{{"designs", many}}.dump()).body).at("designs");
    REQUIRE(sorted.size() == 12);
    for (std::size_t i = 1; i < sorted.size(); ++i)
        CHECK(sorted[i - 1].at("weight_g").get<double>() <= sorted[i].at("weight_g").get<double>());
    for (const auto& e : sorted) {
        const auto idx = e.at("input_index").get<std::size_t>();
        CHECK(e.at("name") == many[idx].at("name"));
    }
}

TEST_CASE("compare design count limits") {
    const auto s = loaded();
    json too_many = json::array();
    for (int i = 0; i < 21; ++i) too_many.push_back(design("d", 20, 50));
    CHECK(s.compare(too_many.dump()).status == 400);
    CHECK(s.compare(json::array({design("only", 20, 50)}).dump()).status == 400);
    CHECK(s.compare(json{{"designs", 3}}.dump()).status == 400);
    auto bad = json::array({design("a", 20, 50), design("b", 20, 50)});
    bad[1]["parameters"]["beam_count"] = 0;
    CHECK(s.compare(bad.dump()).status == 400);
}

TEST_CASE("models listing echoes metrics") {
    const auto s = loaded();
    const auto j = json::parse(s.list_models().body);
    REQUIRE(j.at("models").size() == 1);
    const auto& m = j.at("models")[0];
    CHECK(m.at("metrics") == kMetrics);
    CHECK(m.at("feature_schema").at("hash") == feature_schema_hash());
    CHECK(m.at("feature_schema").at("features").size() == kFeatureCount);
    CHECK(s.not_found("/api/nothing").status == 404);
}

TEST_CASE("bind address parsing") {
    const auto b = parse_bind("0.0.0.0:9000");
    CHECK(b.host == "0.0.0.0");
    CHECK(b.port == 9000);
    CHECK(parse_bind(":81").port == 81);
    CHECK_THROWS_AS(parse_bind("host:abc"), pinnbridge::Error);
    CHECK_THROWS_AS(parse_bind("host:70000"), pinnbridge::Error);
}

TEST_CASE("http round-trip with concurrent identical requests") {
    const auto s = loaded();
    httplib::Server server;
    register_routes(server, s);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const auto body = default_body().dump();
    std::vector<std::future<std::pair<int, std::string>>> results;
    for (int i = 0; i < 100; ++i)
        results.push_back(std::async(std::launch::async, [&] {
            httplib::Client c("127.0.0.1", port);
            auto r = c.Post("/api/predict", body, "application/json");
            return r ? std::pair{r->status, r->body} : std::pair{0, std::string()};
        }));
    const auto serial = s.predict(body).body;
    for (auto& f : results) {
        const auto [status, text] = f.get();
        CHECK(status == 200);
        CHECK(text == serial);
    }

    httplib::Client c("127.0.0.1", port);
    auto missing = c.Get("/api/unknown");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body).at("error") == "NotFound");

    auto models = c.Get("/api/models");
    REQUIRE(models);
    CHECK(models->status == 200);

    httplib::MultipartFormDataItems form = {{"image", png_of("triangle"), "truss.png", "image/png"},
                                            {"scale_factor", "0.5", "", ""}};
    auto ex = c.Post("/api/extract", form);
    REQUIRE(ex);
    CHECK(ex->status == 200);
    CHECK(json::parse(ex->body).at("beam_count") == 3);

    httplib::MultipartFormDataItems no_scale = {{"image", png_of("triangle"), "truss.png", "image/png"}};
    auto ns = c.Post("/api/extract", no_scale);
    REQUIRE(ns);
    CHECK(ns->status == 400);

    server.stop();
    t.join();
}

}
