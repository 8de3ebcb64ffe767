#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinnbridge/core.hpp"
#include "pinnbridge/models.hpp"
#include "pinnbridge/physics.hpp"

namespace pinnbridge::training {

struct TrainConfig {
    models::Arch arch = models::Arch::Pinn;
    double lambda_data = 0.7;
    double lambda_physics = 0.3;
    double learning_rate = 1e-3;
    int epochs = 200;
    std::size_t batch_size = 32;
    double validation_fraction = 0.2;
    bool early_stopping = true;
    int patience = 30;
    std::uint64_t seed = 0;
    std::optional<double> clip_norm;  // off by default
    physics::PhysicsConstants constants{};

    // PINN: 200 epochs, batch 32, patience 30. PIKAN: 80 epochs, batch 8, no early stopping.
    static TrainConfig defaults(models::Arch arch);
    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double data_loss = 0.0;
    double physics_loss = 0.0;
    double total_loss = 0.0;
    double val_loss = 0.0;
    std::vector<std::pair<std::string, double>> residuals;  // per-constraint means
};

struct LossHistory {
    std::vector<EpochRecord> epochs;

    std::string to_csv() const;
    nlohmann::json to_json() const;
    static LossHistory from_csv(std::istream& in);
    static LossHistory from_json(const nlohmann::json& j);
};

struct TrainResult {
    std::unique_ptr<models::Regressor> model;
    LossHistory history;
    int best_epoch = 0;
    std::vector<std::size_t> fit_indices;         // indices into the dataset used for gradient steps
    std::vector<std::size_t> validation_indices;  // carved from the training split
};

struct LossValue {
    double data = 0.0;
    double physics = 0.0;
    double total = 0.0;
    physics::PhysicsResiduals residuals;
};

// Builds lambda_data * MSE + lambda_physics * physics(arch) on the tape.
ad::Var combined_loss(ad::Var predicted, const std::vector<double>& targets,
                      const std::vector<BridgeParameters>& batch, const TrainConfig& cfg, LossValue* value = nullptr);

// Requires ds.split. Progress lines go to `log` when given.
TrainResult train(const Dataset& ds, const TrainConfig& cfg, std::ostream* log = nullptr);

// Combined loss in inference mode over the given samples.
LossValue evaluate_validation(const models::Regressor& model, const std::vector<BridgeSample>& val,
                              const TrainConfig& cfg);

}  // namespace pinnbridge::training
