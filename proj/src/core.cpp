#include "pinnbridge/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pinnbridge/error.hpp"
#include "pinnbridge/rng.hpp"

namespace pinnbridge {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidGeometry: return "InvalidGeometry";
        case ErrorKind::InvalidMaterial: return "InvalidMaterial";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::InvalidSample: return "InvalidSample";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::BatchShapeError: return "BatchShapeError";
        case ErrorKind::ShapeError: return "ShapeError";
        case ErrorKind::ContractError: return "ContractError";
        case ErrorKind::NumericalError: return "NumericalError";
        case ErrorKind::Unsupported: return "Unsupported";
        case ErrorKind::FormatError: return "FormatError";
        case ErrorKind::InvalidImage: return "InvalidImage";
        case ErrorKind::NoStructure: return "NoStructure";
        case ErrorKind::IoError: return "IoError";
    }
    return "Error";
}

void MaterialProperties::validate() const {
    if (!(density_g_cm3 > 0.0) || !std::isfinite(density_g_cm3))
        fail(ErrorKind::InvalidMaterial, "density must be positive");
    if (!(youngs_modulus_gpa > 0.0) || !std::isfinite(youngs_modulus_gpa))
        fail(ErrorKind::InvalidMaterial, "youngs_modulus must be positive");
    if (!(yield_strength_mpa > 0.0) || !std::isfinite(yield_strength_mpa))
        fail(ErrorKind::InvalidMaterial, "yield_strength must be positive");
}

double BridgeGeometry::total_length_mm() const {
    if (!beam_lengths_mm.empty())
        return std::accumulate(beam_lengths_mm.begin(), beam_lengths_mm.end(), 0.0);
    if (aggregate) return aggregate->total_mm;
    fail(ErrorKind::InvalidGeometry, "no beam lengths");
}

double BridgeGeometry::mean_length_mm() const {
    if (!beam_lengths_mm.empty()) {
        if (beam_count <= 0) fail(ErrorKind::InvalidGeometry, "beam_count must be positive");
        return total_length_mm() / static_cast<double>(beam_count);
    }
    if (aggregate) return aggregate->mean_mm;
    fail(ErrorKind::InvalidGeometry, "no beam lengths");
}

bool BridgeGeometry::validate() const {
    if (beam_count <= 0) fail(ErrorKind::InvalidGeometry, "beam_count must be a positive integer");
    if (!has_lengths()) fail(ErrorKind::InvalidGeometry, "beam_lengths is empty");
    if (!beam_lengths_mm.empty()) {
        if (beam_lengths_mm.size() != static_cast<std::size_t>(beam_count))
            fail(ErrorKind::InvalidGeometry, "beam_count does not match number of beam_lengths");
        for (double l : beam_lengths_mm)
            if (!(l > 0.0) || !std::isfinite(l))
                fail(ErrorKind::InvalidGeometry, "beam lengths must be positive");
    } else {
        if (!(aggregate->total_mm > 0.0) || !(aggregate->mean_mm > 0.0) ||
            !std::isfinite(aggregate->total_mm) || !std::isfinite(aggregate->mean_mm))
            fail(ErrorKind::InvalidGeometry, "beam lengths must be positive");
    }
    if (!(beam_diameter_mm >= 0.5 && beam_diameter_mm <= 5.0))
        fail(ErrorKind::InvalidGeometry, "beam_diameter must lie in [0.5, 5.0] mm");
    if (!(mean_angle_deg >= 0.0 && mean_angle_deg <= 90.0))
        fail(ErrorKind::InvalidGeometry, "mean_angle must lie in [0, 90] degrees");
    return beam_diameter_mm < 1.8 || beam_diameter_mm > 2.0;
}

bool BridgeParameters::validate() const {
    material.validate();
    return geometry.validate();
}

const std::array<std::string_view, kFeatureCount>& feature_names() {
    static const std::array<std::string_view, kFeatureCount> names = {
        "beam_count",       "total_length_mm", "mean_length_mm", "beam_diameter_mm",
        "mean_angle_deg",   "density_g_cm3",   "youngs_modulus_gpa", "yield_strength_mpa",
    };
    return names;
}

std::string feature_schema_hash() {
    // FNV-1a over the ordered names.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto name : feature_names()) {
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        h ^= static_cast<unsigned char>('|');
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

FeatureVector to_feature_vector(const BridgeParameters& params) {
    const auto& g = params.geometry;
    if (!g.has_lengths()) fail(ErrorKind::InvalidGeometry, "beam_lengths is empty");
    if (g.beam_count <= 0) fail(ErrorKind::InvalidGeometry, "beam_count must be positive");
    return {
        static_cast<double>(g.beam_count),
        g.total_length_mm(),
        g.mean_length_mm(),
        g.beam_diameter_mm,
        g.mean_angle_deg,
        params.material.density_g_cm3,
        params.material.youngs_modulus_gpa,
        params.material.yield_strength_mpa,
    };
}

BridgeParameters from_feature_vector(const FeatureVector& v) {
    BridgeParameters p;
    p.geometry.beam_count = static_cast<int>(std::lround(v[0]));
    p.geometry.aggregate = LengthAggregate{v[1], v[2]};
    p.geometry.beam_diameter_mm = v[3];
    p.geometry.mean_angle_deg = v[4];
    p.material = {v[5], v[6], v[7]};
    return p;
}

StandardizationStats standardize_fit(const std::vector<FeatureVector>& train_vectors) {
    if (train_vectors.size() < 2)
        fail(ErrorKind::InsufficientData, "standardization needs at least 2 vectors");
    const double n = static_cast<double>(train_vectors.size());
    StandardizationStats s;
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        double sum = 0.0;
        for (const auto& v : train_vectors) sum += v[k];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& v : train_vectors) ss += (v[k] - mean) * (v[k] - mean);
        const double sd = std::sqrt(ss / n);
        s.mean[k] = mean;
        // Relative cutoff: a constant column can still pick up rounding noise.
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            s.std[k] = 1.0;
            s.degenerate[k] = true;
        } else {
            s.std[k] = sd;
        }
    }
    return s;
}

FeatureVector standardize_apply(const FeatureVector& v, const StandardizationStats& stats) {
    FeatureVector out{};
    for (std::size_t k = 0; k < kFeatureCount; ++k) out[k] = (v[k] - stats.mean[k]) / stats.std[k];
    return out;
}

FeatureVector standardize_invert(const FeatureVector& z, const StandardizationStats& stats) {
    FeatureVector out{};
    for (std::size_t k = 0; k < kFeatureCount; ++k) out[k] = z[k] * stats.std[k] + stats.mean[k];
    return out;
}

std::vector<FeatureVector> Dataset::features() const {
    std::vector<FeatureVector> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(to_feature_vector(s.params));
    return out;
}

std::vector<FeatureVector> Dataset::features(const std::vector<std::size_t>& indices) const {
    std::vector<FeatureVector> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(to_feature_vector(samples.at(i).params));
    return out;
}

std::vector<double> Dataset::weights() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.weight_g);
    return out;
}

std::vector<double> Dataset::weights(const std::vector<std::size_t>& indices) const {
    std::vector<double> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(samples.at(i).weight_g);
    return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.samples.reserve(indices.size());
    for (auto i : indices) out.samples.push_back(samples.at(i));
    out.stats = stats;
    return out;
}

Dataset split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        fail(ErrorKind::InvalidConfig, "test_fraction must lie in (0, 1)");
    const std::size_t n = ds.size();
    if (n < 5) fail(ErrorKind::InsufficientData, "split needs at least 5 samples");
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    if (n_test == 0 || n_test >= n)
        fail(ErrorKind::InsufficientData, "split leaves an empty partition");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = derive_rng(seed, 0x5911);
    shuffle(order, rng);

    Split split;
    split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    Dataset out = ds;
    out.split = std::move(split);
    return out;
}

}  // namespace pinnbridge
