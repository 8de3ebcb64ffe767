#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pinnbridge {

// Boundary units: mm, g, g/cm^3, GPa, MPa, degrees.

struct MaterialProperties {
    double density_g_cm3 = 1.4;
    double youngs_modulus_gpa = 3.8;
    double yield_strength_mpa = 30.0;

    void validate() const;
};

// Aggregate lengths for bridges known only by totals (CSV rows, augmented samples).
struct LengthAggregate {
    double total_mm = 0.0;
    double mean_mm = 0.0;
};

struct BridgeGeometry {
    std::vector<double> beam_lengths_mm;  // per segment; may be empty when only aggregates are known
    double beam_diameter_mm = 1.9;
    double mean_angle_deg = 45.0;
    int beam_count = 0;
    std::optional<LengthAggregate> aggregate;

    double total_length_mm() const;
    double mean_length_mm() const;
    bool has_lengths() const { return !beam_lengths_mm.empty() || aggregate.has_value(); }

    // Throws InvalidGeometry. Returns true when the diameter lies outside the
    // typical 1.8-2.0 mm strand band (a warning, not an error).
    bool validate() const;
};

struct BridgeParameters {
    BridgeGeometry geometry;
    MaterialProperties material;

    bool validate() const;
};

struct BridgeSample {
    BridgeParameters params;
    double weight_g = 0.0;
    std::string id;
};

inline constexpr std::size_t kFeatureCount = 8;

enum class Feature : std::size_t {
    BeamCount = 0,
    TotalLength,
    MeanLength,
    BeamDiameter,
    MeanAngle,
    Density,
    YoungsModulus,
    YieldStrength,
};

using FeatureVector = std::array<double, kFeatureCount>;

const std::array<std::string_view, kFeatureCount>& feature_names();

// Stable fingerprint of the feature schema, stored in model files.
std::string feature_schema_hash();

FeatureVector to_feature_vector(const BridgeParameters& params);

// Inverse of to_feature_vector for aggregate-only geometry.
BridgeParameters from_feature_vector(const FeatureVector& v);

struct StandardizationStats {
    FeatureVector mean{};
    FeatureVector std{};
    std::array<bool, kFeatureCount> degenerate{};
};

StandardizationStats standardize_fit(const std::vector<FeatureVector>& train_vectors);
FeatureVector standardize_apply(const FeatureVector& v, const StandardizationStats& stats);
FeatureVector standardize_invert(const FeatureVector& z, const StandardizationStats& stats);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct Dataset {
    std::vector<BridgeSample> samples;
    std::optional<StandardizationStats> stats;
    std::optional<Split> split;

    std::size_t size() const { return samples.size(); }
    std::vector<FeatureVector> features() const;
    std::vector<FeatureVector> features(const std::vector<std::size_t>& indices) const;
    std::vector<double> weights() const;
    std::vector<double> weights(const std::vector<std::size_t>& indices) const;
    Dataset subset(const std::vector<std::size_t>& indices) const;
};

// Deterministic shuffled split; |test| = round(n * test_fraction).
Dataset split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed);

}  // namespace pinnbridge
