#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinnbridge/autodiff.hpp"
#include "pinnbridge/core.hpp"
#include "pinnbridge/rng.hpp"

namespace pinnbridge::models {

enum class Arch { Pinn, Pikan };
enum class Mode { Train, Infer };

std::string_view arch_tag(Arch arch);
Arch parse_arch(std::string_view tag);

struct PinnConfig {
    std::vector<std::size_t> hidden = {64, 128, 64};
    double dropout = 0.3;
};

struct PikanConfig {
    int degree = 3;
    std::size_t branches = 8;
    std::vector<std::size_t> branch_hidden = {32, 16};
    double branch_dropout = 0.1;
    std::vector<std::size_t> aggregator_hidden = {64, 32};
    double aggregator_dropout = 0.2;
};

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEps = 1e-5;

struct Dense {
    ad::Tensor weight;  // in x out
    ad::Tensor bias;    // 1 x out
};

struct BatchNorm {
    ad::Tensor gamma, beta;                 // learnable, 1 x n
    ad::Tensor running_mean, running_var;   // 1 x n
};

// Affine map from the network's raw output to grams.
struct TargetScaling {
    double mean = 0.0;
    double scale = 1.0;
};

struct NamedTensor {
    std::string name;
    ad::Tensor* tensor;
};

// Train mode draws dropout masks from `rng` and reports batch-norm moments
// through `moments` (one entry per batch-norm layer, in layer order) so the
// caller can fold them into the running statistics.
struct ForwardContext {
    Mode mode = Mode::Infer;
    Rng* rng = nullptr;
    std::vector<ad::BatchMoments>* moments = nullptr;
};

// Expanded feature count for n inputs at the given degree.
std::size_t polynomial_dimension(std::size_t n, int degree);

// Linear terms, then squares, then pairwise products x_i x_j (i < j), then cubes.
std::vector<double> polynomial_expand(std::span<const double> x, int degree);
ad::Tensor polynomial_expand(const ad::Tensor& batch, int degree);

// Inverted dropout mask: zeros with probability `rate`, survivors scaled by 1/(1-rate).
ad::Tensor dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

class Regressor {
public:
    virtual ~Regressor() = default;

    virtual Arch arch() const = 0;
    virtual nlohmann::json config_json() const = 0;
    virtual std::unique_ptr<Regressor> clone() const = 0;

    // Trainable tensors in a fixed order.
    std::vector<ad::Tensor*> parameters();
    std::vector<const ad::Tensor*> parameters() const;
    // Every persisted tensor (trainables and running statistics) with stable names.
    virtual std::vector<NamedTensor> named_tensors() = 0;
    std::size_t parameter_count() const;

    // One variable per parameters() entry, in order.
    std::vector<ad::Var> bind(ad::Tape& tape) const;

    // x_std: standardized features (batch x 8). Returns (batch x 1) predictions in grams.
    virtual ad::Var forward(ad::Tape& tape, std::span<const ad::Var> params, const ad::Tensor& x_std,
                            ForwardContext& ctx) const = 0;

    void apply_batch_moments(const std::vector<ad::BatchMoments>& moments);
    std::size_t batch_norm_count() { return batch_norms().size(); }

    // Inference helpers; deterministic and safe to call concurrently.
    std::vector<double> predict_standardized(const ad::Tensor& x_std) const;
    std::vector<double> predict(const std::vector<FeatureVector>& raw) const;
    double predict(const BridgeParameters& params) const;

    ad::Tensor standardize(const std::vector<FeatureVector>& raw) const;

    StandardizationStats stats{};
    TargetScaling target{};
    bool trained = false;

protected:
    virtual std::vector<BatchNorm*> batch_norms() = 0;
    virtual std::vector<ad::Tensor*> trainables() = 0;
};

class PinnModel final : public Regressor {
public:
    explicit PinnModel(PinnConfig config = {}, std::uint64_t seed = 0);

    Arch arch() const override { return Arch::Pinn; }
    nlohmann::json config_json() const override;
    std::unique_ptr<Regressor> clone() const override { return std::make_unique<PinnModel>(*this); }
    std::vector<NamedTensor> named_tensors() override;
    ad::Var forward(ad::Tape& tape, std::span<const ad::Var> params, const ad::Tensor& x_std,
                    ForwardContext& ctx) const override;

    const PinnConfig& config() const { return config_; }
    std::vector<Dense>& hidden() { return hidden_; }
    std::vector<BatchNorm>& norms() { return norms_; }
    Dense& output() { return output_; }

protected:
    std::vector<BatchNorm*> batch_norms() override;
    std::vector<ad::Tensor*> trainables() override;

private:
    PinnConfig config_;
    std::vector<Dense> hidden_;
    std::vector<BatchNorm> norms_;
    Dense output_;
};

struct Branch {
    std::vector<Dense> hidden;
    std::vector<BatchNorm> norms;
    Dense output;  // -> scalar
};

class PikanModel final : public Regressor {
public:
    explicit PikanModel(PikanConfig config = {}, std::uint64_t seed = 0);

    Arch arch() const override { return Arch::Pikan; }
    nlohmann::json config_json() const override;
    std::unique_ptr<Regressor> clone() const override { return std::make_unique<PikanModel>(*this); }
    std::vector<NamedTensor> named_tensors() override;
    ad::Var forward(ad::Tape& tape, std::span<const ad::Var> params, const ad::Tensor& x_std,
                    ForwardContext& ctx) const override;

    // Branch outputs (batch x branches) in inference mode.
    ad::Tensor branch_outputs(const ad::Tensor& x_std) const;

    const PikanConfig& config() const { return config_; }
    std::vector<Branch>& branches() { return branches_; }
    std::vector<Dense>& aggregator() { return aggregator_; }
    Dense& output() { return output_; }

protected:
    std::vector<BatchNorm*> batch_norms() override;
    std::vector<ad::Tensor*> trainables() override;

private:
    // Shared by forward() and branch_outputs(); returns the branch Vars.
    std::vector<ad::Var> run_branches(ad::Tape& tape, std::span<const ad::Var> params, const ad::Tensor& x_std,
                                      ForwardContext& ctx, std::size_t& cursor) const;

    PikanConfig config_;
    std::vector<Branch> branches_;
    std::vector<Dense> aggregator_;
    Dense output_;
};

std::unique_ptr<Regressor> make_model(Arch arch, std::uint64_t seed);

// Per-branch scalar outputs as feature `feature_index` of the standardized
// baseline is swept; rows follow the sweep, columns the branches.
ad::Tensor branch_response(const PikanModel& model, std::size_t feature_index, std::span<const double> sweep,
                           const FeatureVector& baseline_std);

// ---- model files ------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::string_view kModelMagic = "pinnbridge-model";

struct ModelFile {
    std::unique_ptr<Regressor> model;
    nlohmann::json metrics;  // evaluation report persisted at training time
    nlohmann::json history;
};

nlohmann::json to_json(Regressor& model, const nlohmann::json& metrics = nullptr,
                       const nlohmann::json& history = nullptr);
ModelFile from_json(const nlohmann::json& j, std::optional<Arch> expected = std::nullopt);

void save(Regressor& model, const std::filesystem::path& path, const nlohmann::json& metrics = nullptr,
          const nlohmann::json& history = nullptr);
ModelFile load(const std::filesystem::path& path, std::optional<Arch> expected = std::nullopt);

}  // namespace pinnbridge::models
