#include "pinnbridge/service.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <span>

#include <httplib.h>

#include "pinnbridge/error.hpp"
#include "pinnbridge/params_json.hpp"
#include "pinnbridge/physics.hpp"

namespace pinnbridge::service {

namespace {

int status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NoStructure: return 422;
        case ErrorKind::NumericalError:
        case ErrorKind::IoError: return 500;
        default: return 400;
    }
}

nlohmann::json residual_summary(const BridgeParameters& p, double weight, models::Arch arch) {
    const std::vector<BridgeParameters> batch{p};
    const std::vector<double> pred{weight};
    const auto value = arch == models::Arch::Pinn ? physics::pinn_physics_loss(batch, pred)
                                                  : physics::pikan_physics_loss(batch, pred);
    nlohmann::json terms = nlohmann::json::object();
    const auto list = arch == models::Arch::Pinn ? value.residuals.pinn_terms() : value.residuals.pikan_terms();
    for (const auto& [name, v] : list) terms[name] = v;
    return {{"total", value.total}, {"terms", terms}};
}

std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e || b == e) return std::nullopt;
    return v;
}

double error_band(const nlohmann::json& metrics) {
    if (metrics.is_object()) {
        const auto it = metrics.find("mae");
        if (it != metrics.end() && it->is_number()) return std::max(0.0, it->get<double>());
    }
    return 0.0;
}

}  // namespace

Response error_response(int status, const std::string& kind, const std::string& message) {
    return {status, nlohmann::json{{"error", kind}, {"message", message}}.dump()};
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      extract_slots_(std::make_unique<std::counting_semaphore<>>(std::max<std::ptrdiff_t>(1, config_.extract_workers))) {}

void Service::add_model(LoadedModel m) {
    if (!m.model) fail(ErrorKind::ContractError, "add_model: null model");
    if (index_.contains(m.id)) fail(ErrorKind::InvalidConfig, "duplicate model id '" + m.id + "'");
    index_[m.id] = models_.size();
    models_.push_back(std::move(m));
}

void Service::load_model(const std::filesystem::path& path, std::optional<std::string> id,
                         std::optional<nlohmann::json> metrics_override) {
    auto file = models::load(path);
    LoadedModel m;
    m.id = id.value_or(path.stem().string());
    m.metrics = metrics_override ? *metrics_override : file.metrics;
    m.model = std::shared_ptr<const models::Regressor>(std::move(file.model));
    m.source = path;
    add_model(std::move(m));
}

const LoadedModel* Service::resolve(const nlohmann::json& body) const {
    if (body.is_object() && body.contains("model_id")) {
        const auto& v = body.at("model_id");
        if (!v.is_string()) fail(ErrorKind::InvalidSample, "field 'model_id' must be a string");
        const auto it = index_.find(v.get<std::string>());
        if (it == index_.end()) fail(ErrorKind::InvalidSample, "unknown model_id '" + v.get<std::string>() + "'");
        return &models_[it->second];
    }
    return &models_.front();
}

nlohmann::json Service::predict_json(const BridgeParameters& params, const LoadedModel& m) const {
    const bool diameter_warning = params.validate();
    const double w = m.model->predict(params);
    if (!std::isfinite(w)) fail(ErrorKind::NumericalError, "model produced a non-finite prediction");
    nlohmann::json warnings = nlohmann::json::array();
    if (diameter_warning) warnings.push_back("beam_diameter_mm outside the typical 1.8-2.0 mm strand band");
    return {
        {"weight_g", w},
        {"error_band_g", error_band(m.metrics)},
        {"model_id", m.id},
        {"arch", std::string(models::arch_tag(m.model->arch()))},
        {"physics_residuals", residual_summary(params, w, m.model->arch())},
        {"warnings", warnings},
    };
}

Response Service::predict(const std::string& body) const {
    if (models_.empty()) return error_response(503, "NoModel", "no model loaded");
    try {
        const auto j = nlohmann::json::parse(body);
        const auto* m = resolve(j);
        const auto& pj = j.is_object() && j.contains("parameters") ? j.at("parameters") : j;
        return {200, predict_json(params_from_json(pj), *m).dump()};
    } catch (const nlohmann::json::parse_error& e) {
        return error_response(400, "ParseError", std::string("malformed JSON: ") + e.what());
    } catch (const Error& e) {
        return error_response(status_for(e.kind()), std::string(to_string(e.kind())), e.what());
    }
}

Response Service::extract(const ExtractRequest& req) const {
    if (!req.image) return error_response(400, "InvalidImage", "missing 'image' file field");
    if (req.image->size() > config_.max_upload_bytes)
        return error_response(413, "PayloadTooLarge",
                              "image exceeds " + std::to_string(config_.max_upload_bytes) + " bytes");
    if (!req.scale_factor) return error_response(400, "InvalidConfig", "missing 'scale_factor' field");
    const auto scale = parse_double(*req.scale_factor);
    if (!scale || !(*scale > 0.0) || !std::isfinite(*scale))
        return error_response(400, "InvalidConfig", "scale_factor must be a positive number (mm per pixel)");

    extract_slots_->acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{*extract_slots_};
    try {
        const auto bytes = std::as_bytes(std::span(req.image->data(), req.image->size()));
        const auto img = vision::decode_image(
            std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
        const auto ex = vision::extract_parameters(img, *scale, config_.pipeline);
        auto j = vision::to_json(ex);
        j["parameters"] = params_to_json(ex.to_parameters(config_.pipeline.beam_diameter_mm));
        return {200, j.dump()};
    } catch (const Error& e) {
        return error_response(status_for(e.kind()), std::string(to_string(e.kind())), e.what());
    }
}

Response Service::compare(const std::string& body) const {
    if (models_.empty()) return error_response(503, "NoModel", "no model loaded");
    try {
        const auto j = nlohmann::json::parse(body);
        const auto* m = resolve(j);
        const nlohmann::json* designs = nullptr;
        if (j.is_array()) designs = &j;
        else if (j.is_object() && j.contains("designs")) designs = &j.at("designs");
        if (!designs || !designs->is_array())
            return error_response(400, "InvalidSample", "body must hold a 'designs' array");
        if (designs->size() < kMinCompareDesigns || designs->size() > kMaxCompareDesigns)
            return error_response(400, "InvalidSample",
                                  "compare needs between 2 and 20 designs, got " + std::to_string(designs->size()));

        struct Row {
            std::size_t order;
            std::string name;
            nlohmann::json result;
        };
        std::vector<Row> rows;
        for (std::size_t i = 0; i < designs->size(); ++i) {
            const auto& d = (*designs)[i];
            if (!d.is_object()) return error_response(400, "InvalidSample", "design " + std::to_string(i) + " must be an object");
            std::string name = "design-" + std::to_string(i + 1);
            if (d.contains("name")) {
                if (!d.at("name").is_string())
                    return error_response(400, "InvalidSample", "design " + std::to_string(i) + ": 'name' must be a string");
                name = d.at("name").get<std::string>();
            }
            const auto& pj = d.contains("parameters") ? d.at("parameters") : d;
            try {
                rows.push_back({i, name, predict_json(params_from_json(pj), *m)});
            } catch (const Error& e) {
                return error_response(status_for(e.kind()), std::string(to_string(e.kind())),
                                      "design '" + name + "': " + e.what());
            }
        }
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
            return a.result.at("weight_g").get<double>() < b.result.at("weight_g").get<double>();
        });
        nlohmann::json out = nlohmann::json::array();
        for (auto& r : rows) {
            auto entry = std::move(r.result);
            entry["name"] = r.name;
            entry["input_index"] = r.order;
            out.push_back(std::move(entry));
        }
        return {200, nlohmann::json{{"model_id", m->id}, {"designs", out}}.dump()};
    } catch (const nlohmann::json::parse_error& e) {
        return error_response(400, "ParseError", std::string("malformed JSON: ") + e.what());
    } catch (const Error& e) {
        return error_response(status_for(e.kind()), std::string(to_string(e.kind())), e.what());
    }
}

Response Service::list_models() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& m : models_) {
        nlohmann::json features = nlohmann::json::array();
        for (auto f : feature_names()) features.push_back(std::string(f));
        list.push_back({
            {"id", m.id},
            {"arch", std::string(models::arch_tag(m.model->arch()))},
            {"default", &m == &models_.front()},
            {"metrics", m.metrics},
            {"feature_schema", {{"features", features}, {"hash", feature_schema_hash()}}},
            {"parameter_count", m.model->parameter_count()},
        });
    }
    return {200, nlohmann::json{{"models", list}}.dump()};
}

Response Service::not_found(const std::string& path) const {
    return error_response(404, "NotFound", "no route for " + path);
}

void register_routes(httplib::Server& server, const Service& service) {
    auto send = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server.Post("/api/predict", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.predict(req.body));
    });
    server.Post("/api/compare", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.compare(req.body));
    });
    server.Post("/api/extract", [&service, send](const httplib::Request& req, httplib::Response& res) {
        ExtractRequest er;
        if (req.has_file("image")) er.image = req.get_file_value("image").content;
        if (req.has_file("scale_factor")) er.scale_factor = req.get_file_value("scale_factor").content;
        else if (req.has_param("scale_factor")) er.scale_factor = req.get_param_value("scale_factor");
        if (!req.is_multipart_form_data() && !er.image)
            return send(res, error_response(400, "InvalidImage", "expected multipart/form-data with an 'image' part"));
        send(res, service.extract(er));
    });
    server.Get("/api/models", [&service, send](const httplib::Request&, httplib::Response& res) {
        send(res, service.list_models());
    });

    // Leave headroom for multipart framing around the image part.
    server.set_payload_max_length(service.config().max_upload_bytes + (64u << 10));
    if (service.config().static_dir) server.set_mount_point("/", service.config().static_dir->string());

    server.set_error_handler([&service](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        Response r;
        if (res.status == 404) r = service.not_found(req.path);
        else if (res.status == 413) r = error_response(413, "PayloadTooLarge", "request body too large");
        else r = error_response(res.status, "HttpError", httplib::status_message(res.status));
        res.set_content(r.body, r.content_type);
    });
}

BindAddress parse_bind(const std::string& text) {
    BindAddress b;
    std::string port_text = text;
    if (const auto colon = text.rfind(':'); colon != std::string::npos) {
        if (colon > 0) b.host = text.substr(0, colon);
        port_text = text.substr(colon + 1);
    }
    const auto port = parse_double(port_text);
    if (!port || *port != std::floor(*port) || *port < 0 || *port > 65535)
        fail(ErrorKind::InvalidConfig, "invalid bind address '" + text + "' (expected host:port)");
    b.port = static_cast<int>(*port);
    return b;
}

bool serve(const Service& service, const BindAddress& bind) {
    httplib::Server server;
    register_routes(server, service);
    return server.listen(bind.host, bind.port);
}

}  // namespace pinnbridge::service
