#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinnbridge/models.hpp"
#include "pinnbridge/vision.hpp"

namespace httplib {
class Server;
}

namespace pinnbridge::service {

inline constexpr std::size_t kMaxCompareDesigns = 20;
inline constexpr std::size_t kMinCompareDesigns = 2;

struct ServiceConfig {
    std::size_t max_upload_bytes = 8u << 20;
    std::ptrdiff_t extract_workers = 4;
    vision::PipelineConfig pipeline{};
    std::optional<std::filesystem::path> static_dir;
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

struct ExtractRequest {
    std::optional<std::string> image;         // raw PNG / PPM bytes
    std::optional<std::string> scale_factor;  // form field text, mm per pixel
};

struct LoadedModel {
    std::string id;
    std::shared_ptr<const models::Regressor> model;
    nlohmann::json metrics;  // persisted evaluation report, echoed verbatim
    std::filesystem::path source;
};

// Handlers are plain functions of request data so they can be driven without
// sockets. Loaded models are never mutated after add_model returns, so
// handlers may run concurrently.
class Service {
public:
    explicit Service(ServiceConfig config = {});

    // The first model added becomes the default for requests without model_id.
    void add_model(LoadedModel m);
    // Reads a model file; the id is the file stem unless given.
    void load_model(const std::filesystem::path& path, std::optional<std::string> id = std::nullopt,
                    std::optional<nlohmann::json> metrics_override = std::nullopt);
    bool has_model() const { return !models_.empty(); }
    const ServiceConfig& config() const { return config_; }

    Response predict(const std::string& body) const;
    Response extract(const ExtractRequest& req) const;
    Response compare(const std::string& body) const;
    Response list_models() const;
    Response not_found(const std::string& path) const;

    // Shared by predict and compare: the response object for one design.
    nlohmann::json predict_json(const BridgeParameters& params, const LoadedModel& m) const;

private:
    const LoadedModel* resolve(const nlohmann::json& body) const;

    ServiceConfig config_;
    std::vector<LoadedModel> models_;
    std::map<std::string, std::size_t> index_;
    std::unique_ptr<std::counting_semaphore<>> extract_slots_;
};

Response error_response(int status, const std::string& kind, const std::string& message);

// Installs /api routes, JSON error bodies, payload cap and the optional static mount.
void register_routes(httplib::Server& server, const Service& service);

struct BindAddress {
    std::string host = "127.0.0.1";
    int port = 8080;
};

// "host:port", ":port" or "port".
BindAddress parse_bind(const std::string& text);

// Blocks until the server stops. Returns false when the socket cannot be bound.
bool serve(const Service& service, const BindAddress& bind);

}  // namespace pinnbridge::service
