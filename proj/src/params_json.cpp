#include "pinnbridge/params_json.hpp"

#include <cmath>
#include <string>

#include "pinnbridge/error.hpp"

namespace pinnbridge {

namespace {

double number_field(const nlohmann::json& j, const char* name) {
    const auto it = j.find(name);
    if (it == j.end()) fail(ErrorKind::InvalidSample, std::string("missing field '") + name + "'");
    if (!it->is_number()) fail(ErrorKind::InvalidSample, std::string("field '") + name + "' must be a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) fail(ErrorKind::InvalidSample, std::string("field '") + name + "' must be finite");
    return v;
}

double optional_number(const nlohmann::json& j, const char* name, double fallback) {
    return j.contains(name) ? number_field(j, name) : fallback;
}

}  // namespace

nlohmann::json params_to_json(const BridgeParameters& p) {
    const auto& g = p.geometry;
    nlohmann::json j;
    j["beam_count"] = g.beam_count;
    if (!g.beam_lengths_mm.empty()) {
        j["beam_lengths_mm"] = g.beam_lengths_mm;
    } else if (g.aggregate) {
        j["total_length_mm"] = g.aggregate->total_mm;
        j["mean_length_mm"] = g.aggregate->mean_mm;
    }
    j["beam_diameter_mm"] = g.beam_diameter_mm;
    j["mean_angle_deg"] = g.mean_angle_deg;
    j["density_g_cm3"] = p.material.density_g_cm3;
    j["youngs_modulus_gpa"] = p.material.youngs_modulus_gpa;
    j["yield_strength_mpa"] = p.material.yield_strength_mpa;
    return j;
}

BridgeParameters params_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::InvalidSample, "parameters must be a JSON object");
    BridgeParameters p;
    auto& g = p.geometry;

    const double count = number_field(j, "beam_count");
    if (count != std::floor(count) || std::abs(count) > 1e6)
        fail(ErrorKind::InvalidSample, "field 'beam_count' must be an integer");
    g.beam_count = static_cast<int>(count);
    if (g.beam_count <= 0) fail(ErrorKind::InvalidGeometry, "field 'beam_count' must be a positive integer");

    if (j.contains("beam_lengths_mm")) {
        const auto& arr = j.at("beam_lengths_mm");
        if (!arr.is_array()) fail(ErrorKind::InvalidSample, "field 'beam_lengths_mm' must be an array");
        for (const auto& v : arr) {
            if (!v.is_number()) fail(ErrorKind::InvalidSample, "field 'beam_lengths_mm' must hold numbers");
            g.beam_lengths_mm.push_back(v.get<double>());
        }
    } else if (j.contains("total_length_mm")) {
        const double total = number_field(j, "total_length_mm");
        const double mean = optional_number(j, "mean_length_mm", total / g.beam_count);
        g.aggregate = LengthAggregate{total, mean};
    } else {
        fail(ErrorKind::InvalidSample, "one of 'beam_lengths_mm' or 'total_length_mm' is required");
    }

    g.beam_diameter_mm = optional_number(j, "beam_diameter_mm", g.beam_diameter_mm);
    g.mean_angle_deg = number_field(j, "mean_angle_deg");
    p.material.density_g_cm3 = optional_number(j, "density_g_cm3", p.material.density_g_cm3);
    p.material.youngs_modulus_gpa = optional_number(j, "youngs_modulus_gpa", p.material.youngs_modulus_gpa);
    p.material.yield_strength_mpa = optional_number(j, "yield_strength_mpa", p.material.yield_strength_mpa);
    p.validate();
    return p;
}

}  // namespace pinnbridge
