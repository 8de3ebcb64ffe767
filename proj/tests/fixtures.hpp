#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "pinnbridge/core.hpp"
#include "pinnbridge/vision.hpp"

namespace fixtures {

inline pinnbridge::BridgeParameters default_bridge() {
    pinnbridge::BridgeParameters p;
    p.geometry.beam_count = 20;
    p.geometry.beam_lengths_mm.assign(20, 50.0);
    p.geometry.beam_diameter_mm = 1.9;
    p.geometry.mean_angle_deg = 45.0;
    return p;
}

struct TrussCase {
    std::string name;
    pinnbridge::vision::TrussDrawing drawing;
};

// Node coordinates in mm with y up. Each member list equals the graph obtained
// by linking every node to its two Manhattan-nearest neighbours, which is the
// topology the extractor can recover.
inline std::vector<TrussCase> truss_cases() {
    constexpr double u = 60.0;
    return {
        {"triangle", {{{0, 0}, {3 * u, 0}, {1.5 * u, 2 * u}}, {{0, 1}, {1, 2}, {0, 2}}}},
        {"trapezoid", {{{0, 0}, {4 * u, 0}, {3 * u, 2 * u}, {u, 2 * u}}, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}}},
        {"king-post",
         {{{0, 0}, {2 * u, 0}, {4 * u, 0}, {2 * u, -1.5 * u}}, {{0, 1}, {1, 2}, {0, 3}, {1, 3}, {2, 3}}}},
        {"warren",
         {{{0, 0}, {2 * u, 0}, {4 * u, 0}, {1.25 * u, u}, {2.75 * u, u}},
          {{0, 1}, {1, 2}, {0, 3}, {3, 1}, {1, 4}, {4, 2}, {3, 4}}}},
        {"scalene", {{{0, 0}, {4 * u, 0}, {u, 1.6 * u}}, {{0, 1}, {1, 2}, {0, 2}}}},
    };
}

inline double member_length(const pinnbridge::vision::TrussDrawing& t, std::size_t m) {
    const auto [a, b] = t.members[m];
    return std::hypot(t.nodes_mm[a].first - t.nodes_mm[b].first, t.nodes_mm[a].second - t.nodes_mm[b].second);
}

// Acute angle between the lines carrying two members, in degrees.
inline double line_angle(const pinnbridge::vision::TrussDrawing& t, std::size_t m1, std::size_t m2) {
    auto dir = [&](std::size_t m) {
        const auto [a, b] = t.members[m];
        return std::atan2(t.nodes_mm[b].second - t.nodes_mm[a].second, t.nodes_mm[b].first - t.nodes_mm[a].first);
    };
    double d = std::fmod(std::abs(dir(m1) - dir(m2)), std::numbers::pi);
    if (d > std::numbers::pi / 2) d = std::numbers::pi - d;
    return d * 180.0 / std::numbers::pi;
}

}  // namespace fixtures
