#include <fstream>
#include <sstream>

#include "pinnbridge/error.hpp"
#include "pinnbridge/models.hpp"

namespace pinnbridge::models {

using nlohmann::json;

namespace {

PinnConfig pinn_config_from(const json& j) {
    PinnConfig c;
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.dropout = j.at("dropout").get<double>();
    return c;
}

PikanConfig pikan_config_from(const json& j) {
    PikanConfig c;
    c.degree = j.at("degree").get<int>();
    c.branches = j.at("branches").get<std::size_t>();
    c.branch_hidden = j.at("branch_hidden").get<std::vector<std::size_t>>();
    c.branch_dropout = j.at("branch_dropout").get<double>();
    c.aggregator_hidden = j.at("aggregator_hidden").get<std::vector<std::size_t>>();
    c.aggregator_dropout = j.at("aggregator_dropout").get<double>();
    return c;
}

json stats_json(const StandardizationStats& s) {
    return {{"mean", s.mean}, {"std", s.std}, {"degenerate", s.degenerate}};
}

StandardizationStats stats_from(const json& j) {
    StandardizationStats s;
    s.mean = j.at("mean").get<FeatureVector>();
    s.std = j.at("std").get<FeatureVector>();
    s.degenerate = j.at("degenerate").get<std::array<bool, kFeatureCount>>();
    for (double sd : s.std)
        if (!(sd > 0.0)) fail(ErrorKind::FormatError, "standardization std must be positive");
    return s;
}

}  // namespace

json to_json(Regressor& model, const json& metrics, const json& history) {
    json layers = json::array();
    for (const auto& nt : model.named_tensors())
        layers.push_back({{"name", nt.name}, {"shape", nt.tensor->shape()}, {"values", nt.tensor->data()}});
    json schema = {{"features", json::array()}, {"hash", feature_schema_hash()}};
    for (auto name : feature_names()) schema["features"].push_back(std::string(name));
    json j = {
        {"format", kModelMagic},
        {"version", kModelFormatVersion},
        {"arch", arch_tag(model.arch())},
        {"config", model.config_json()},
        {"stats", stats_json(model.stats)},
        {"target", {{"mean", model.target.mean}, {"scale", model.target.scale}}},
        {"schema", schema},
        {"trained", model.trained},
        {"layers", layers},
    };
    if (!metrics.is_null()) j["metrics"] = metrics;
    if (!history.is_null()) j["history"] = history;
    return j;
}

ModelFile from_json(const json& j, std::optional<Arch> expected) {
    try {
        if (!j.is_object() || !j.contains("format") || j.at("format") != kModelMagic)
            fail(ErrorKind::FormatError, "not a model file (bad magic)");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion)
            fail(ErrorKind::FormatError, "unsupported model format version " + std::to_string(version));
        const auto tag = j.at("arch").get<std::string>();
        if (tag != "pinn" && tag != "pikan") fail(ErrorKind::FormatError, "unknown architecture tag '" + tag + "'");
        const Arch arch = parse_arch(tag);
        if (expected && *expected != arch)
            fail(ErrorKind::FormatError, "architecture tag '" + tag + "' does not match expected '" +
                                             std::string(arch_tag(*expected)) + "'");
        if (j.at("schema").at("hash").get<std::string>() != feature_schema_hash())
            fail(ErrorKind::FormatError, "feature schema hash mismatch");

        ModelFile out;
        if (arch == Arch::Pinn)
            out.model = std::make_unique<PinnModel>(pinn_config_from(j.at("config")));
        else
            out.model = std::make_unique<PikanModel>(pikan_config_from(j.at("config")));
        out.model->stats = stats_from(j.at("stats"));
        out.model->target.mean = j.at("target").at("mean").get<double>();
        out.model->target.scale = j.at("target").at("scale").get<double>();
        out.model->trained = j.value("trained", false);

        const auto& layers = j.at("layers");
        auto named = out.model->named_tensors();
        if (layers.size() != named.size())
            fail(ErrorKind::FormatError, "expected " + std::to_string(named.size()) + " layers, found " +
                                             std::to_string(layers.size()));
        for (std::size_t i = 0; i < named.size(); ++i) {
            const auto& l = layers[i];
            if (l.at("name").get<std::string>() != named[i].name)
                fail(ErrorKind::FormatError, "layer " + std::to_string(i) + " is '" + l.at("name").get<std::string>() +
                                                 "', expected '" + named[i].name + "'");
            auto shape = l.at("shape").get<std::vector<std::size_t>>();
            auto values = l.at("values").get<std::vector<double>>();
            if (shape != named[i].tensor->shape())
                fail(ErrorKind::FormatError, "shape mismatch in layer '" + named[i].name + "'");
            *named[i].tensor = ad::Tensor(std::move(shape), std::move(values));
        }
        out.metrics = j.value("metrics", json());
        out.history = j.value("history", json());
        return out;
    } catch (const json::exception& e) {
        fail(ErrorKind::FormatError, std::string("malformed model file: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::FormatError) throw;
        fail(ErrorKind::FormatError, e.what());
    }
}

void save(Regressor& model, const std::filesystem::path& path, const json& metrics, const json& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
    out << to_json(model, metrics, history).dump() << '\n';
    if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

ModelFile load(const std::filesystem::path& path, std::optional<Arch> expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::exception& e) {
        fail(ErrorKind::FormatError, "model file is truncated or not JSON: " + std::string(e.what()));
    }
    return from_json(j, expected);
}

}  // namespace pinnbridge::models
