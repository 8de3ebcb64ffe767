#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "pinnbridge/core.hpp"

namespace pinnbridge::data {

struct AugmentConfig {
    double variation_fraction = 0.10;
    double noise_sigma_fraction = 0.01;  // of the per-feature std over the source set
    std::size_t target_count = 100;
    std::uint64_t seed = 0;
};

// CSV columns, in order. Material columns are optional on input.
const std::vector<std::string>& csv_columns();

Dataset load_csv(const std::filesystem::path& path);
Dataset read_csv(std::istream& in);
void write_csv(const Dataset& ds, std::ostream& out);
void save_csv(const Dataset& ds, const std::filesystem::path& path);

// Originals first, then generated samples up to target_count.
Dataset augment(const Dataset& ds, const AugmentConfig& cfg);

// Weight = physics weight x overhead, overhead ~ N(1.15, 0.05) truncated to [1.0, 1.3].
Dataset synthesize(std::uint64_t seed, std::size_t n);

inline constexpr double kOverheadMean = 1.15;
inline constexpr double kOverheadSigma = 0.05;
inline constexpr double kOverheadMin = 1.0;
inline constexpr double kOverheadMax = 1.3;

}  // namespace pinnbridge::data
