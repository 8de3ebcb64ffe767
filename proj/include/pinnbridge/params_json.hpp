#pragma once

#include <nlohmann/json.hpp>

#include "pinnbridge/core.hpp"

namespace pinnbridge {

// Wire form of BridgeParameters:
//   beam_count, beam_diameter_mm, mean_angle_deg,
//   beam_lengths_mm (array) or total_length_mm + mean_length_mm,
//   optional density_g_cm3, youngs_modulus_gpa, yield_strength_mpa.
nlohmann::json params_to_json(const BridgeParameters& p);

// Throws InvalidSample naming the offending field, or the geometry/material
// error raised by validation.
BridgeParameters params_from_json(const nlohmann::json& j);

}  // namespace pinnbridge
