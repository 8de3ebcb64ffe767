#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinnbridge/core.hpp"
#include "pinnbridge/models.hpp"
#include "pinnbridge/training.hpp"

namespace pinnbridge::eval {

struct Metrics {
    double mse = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double r2 = 0.0;
    bool r2_defined = true;  // false when the truth has zero variance
    std::size_t count = 0;
};

Metrics compute_metrics(std::span<const double> truth, std::span<const double> pred);
nlohmann::json to_json(const Metrics& m);

struct RangeBin {
    std::string label;
    double lower = 0.0;  // inclusive
    double upper = 0.0;  // exclusive, except the last closed bin
    bool upper_inclusive = false;
    std::size_t count = 0;
    std::optional<Metrics> metrics;
};

// Bins [0,20), [20,61), [61,121), [121,200], (200,inf) by true weight.
struct RangeBreakdown {
    std::vector<RangeBin> bins;
};

RangeBreakdown range_breakdown(std::span<const double> truth, std::span<const double> pred);

struct Histogram {
    double bin_width = 0.0;
    double origin = 0.0;           // left edge of bin 0
    std::vector<std::size_t> counts;

    std::size_t total() const;
};

struct ErrorDistribution {
    Histogram absolute;            // |p - t| in grams
    Histogram relative;            // 100 (p - t) / t in percent
    double within_10_percent = 0.0;  // fraction of samples with |relative| <= 10
    std::size_t excluded_zero_truth = 0;
};

ErrorDistribution error_distribution(std::span<const double> truth, std::span<const double> pred,
                                     double bin_width_abs = 2.0, double bin_width_rel = 2.0);

struct SensitivityReport {
    std::vector<double> scores;         // per feature
    std::vector<std::size_t> ranking;   // feature indices, descending score
    bool untrained_model = false;
};

// Batch predictor over standardized feature rows.
using StandardizedPredictor = std::function<std::vector<double>(const std::vector<FeatureVector>&)>;

// score_i = mean over samples of (|f(x + d e_i) - f(x)| + |f(x - d e_i) - f(x)|) / 2
SensitivityReport feature_sensitivity(const StandardizedPredictor& f, const std::vector<FeatureVector>& x_std,
                                      double perturbation = 1.0);
SensitivityReport feature_sensitivity(const models::Regressor& model, const Dataset& ds, double perturbation = 1.0,
                                      std::uint64_t seed = 0);

struct ContributionRow {
    int epoch = 0;
    std::string constraint;
    double value = 0.0;
    double share = 0.0;
    bool defined = true;  // false when the epoch's physics total is zero
};

std::vector<ContributionRow> physics_contribution_report(const training::LossHistory& history);
std::string contribution_csv(const std::vector<ContributionRow>& rows);

// Closed-form least squares on standardized features plus intercept.
struct LinearBaseline {
    std::vector<double> coefficients;  // intercept first
    StandardizationStats stats;

    double predict(const FeatureVector& raw) const;
};

LinearBaseline fit_linear_baseline(const std::vector<FeatureVector>& raw, std::span<const double> weights);

// Report files written by write_report, relative to the report directory.
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kRangeFile = "range_breakdown.csv";
inline constexpr const char* kErrorFile = "error_distribution.csv";
inline constexpr const char* kSensitivityFile = "sensitivity.csv";
inline constexpr const char* kContributionFile = "physics_contribution.csv";

std::string range_csv(const RangeBreakdown& rb);
std::string error_csv(const ErrorDistribution& ed);
std::string sensitivity_csv(const SensitivityReport& sr);
nlohmann::json range_json(const RangeBreakdown& rb);
nlohmann::json sensitivity_json(const SensitivityReport& sr);

// Evaluates `model` on `ds` and writes the five report files into `dir`.
// Returns the metrics.json document (top-level mse/rmse/mae/r2 plus breakdowns).
nlohmann::json write_report(const models::Regressor& model, const Dataset& ds, const training::LossHistory* history,
                            const std::filesystem::path& dir);

}  // namespace pinnbridge::eval
