#include "pinnbridge/training.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "pinnbridge/error.hpp"
#include "pinnbridge/rng.hpp"

namespace pinnbridge::training {

using ad::Tensor;
using ad::Var;
using models::Arch;

TrainConfig TrainConfig::defaults(Arch arch) {
    TrainConfig c;
    c.arch = arch;
    if (arch == Arch::Pikan) {
        c.epochs = 80;
        c.batch_size = 8;
        c.early_stopping = false;
    }
    return c;
}

void TrainConfig::validate() const {
    if (!(lambda_data >= 0.0 && lambda_physics >= 0.0))
        fail(ErrorKind::InvalidConfig, "loss weights must be non-negative");
    if (std::abs(lambda_data + lambda_physics - 1.0) > 1e-12)
        fail(ErrorKind::InvalidConfig, "lambda_data + lambda_physics must equal 1");
    if (!(learning_rate > 0.0)) fail(ErrorKind::InvalidConfig, "learning_rate must be positive");
    if (epochs <= 0) fail(ErrorKind::InvalidConfig, "epochs must be positive");
    if (batch_size < 2) fail(ErrorKind::InvalidConfig, "batch_size must be at least 2 (batch normalization)");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        fail(ErrorKind::InvalidConfig, "validation_fraction must lie in [0, 1)");
    if (early_stopping && patience <= 0) fail(ErrorKind::InvalidConfig, "patience must be positive");
    if (clip_norm && !(*clip_norm > 0.0)) fail(ErrorKind::InvalidConfig, "clip_norm must be positive");
    constants.validate();
}

// ---- history -----------------------------------------------------------------

namespace {

std::string num(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        out.push_back(field);
    }
    return out;
}

double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        fail(ErrorKind::ParseError, "history: not a number '" + s + "'");
    return v;
}

}  // namespace

std::string LossHistory::to_csv() const {
    std::ostringstream os;
    os << "epoch,data_loss,physics_loss,total_loss,val_loss";
    if (!epochs.empty())
        for (const auto& [name, v] : epochs.front().residuals) os << ',' << name;
    os << '\n';
    for (const auto& e : epochs) {
        os << e.epoch << ',' << num(e.data_loss) << ',' << num(e.physics_loss) << ',' << num(e.total_loss) << ','
           << num(e.val_loss);
        for (const auto& [name, v] : e.residuals) os << ',' << num(v);
        os << '\n';
    }
    return os.str();
}

nlohmann::json LossHistory::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : epochs) {
        nlohmann::json r = nlohmann::json::object();
        for (const auto& [name, v] : e.residuals) r[name] = v;
        arr.push_back({{"epoch", e.epoch},
                       {"data_loss", e.data_loss},
                       {"physics_loss", e.physics_loss},
                       {"total_loss", e.total_loss},
                       {"val_loss", e.val_loss},
                       {"residuals", r}});
    }
    return arr;
}

LossHistory LossHistory::from_json(const nlohmann::json& j) {
    LossHistory h;
    if (!j.is_array()) return h;
    for (const auto& r : j) {
        EpochRecord e;
        e.epoch = r.at("epoch").get<int>();
        auto get = [&](const char* k) {
            const auto& v = r.at(k);
            return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
        };
        e.data_loss = get("data_loss");
        e.physics_loss = get("physics_loss");
        e.total_loss = get("total_loss");
        e.val_loss = get("val_loss");
        // Residual order follows the physics term names, not JSON key order.
        const auto& res = r.at("residuals");
        const auto& names = res.contains("hooke") ? physics::pikan_term_names() : physics::pinn_term_names();
        for (const auto& name : names)
            if (res.contains(name)) e.residuals.emplace_back(name, res.at(name).get<double>());
        h.epochs.push_back(std::move(e));
    }
    return h;
}

LossHistory LossHistory::from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::ParseError, "history: empty file");
    const auto header = split_csv(line);
    const std::vector<std::string> fixed = {"epoch", "data_loss", "physics_loss", "total_loss", "val_loss"};
    if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
        fail(ErrorKind::ParseError, "history: unexpected header");
    LossHistory h;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const auto f = split_csv(line);
        if (f.size() != header.size()) fail(ErrorKind::ParseError, "history: row " + std::to_string(row) + " has wrong width");
        EpochRecord e;
        e.epoch = static_cast<int>(parse_double(f[0]));
        e.data_loss = parse_double(f[1]);
        e.physics_loss = parse_double(f[2]);
        e.total_loss = parse_double(f[3]);
        e.val_loss = parse_double(f[4]);
        for (std::size_t k = fixed.size(); k < f.size(); ++k) e.residuals.emplace_back(header[k], parse_double(f[k]));
        h.epochs.push_back(std::move(e));
    }
    return h;
}

// ---- loss --------------------------------------------------------------------

Var combined_loss(Var predicted, const std::vector<double>& targets, const std::vector<BridgeParameters>& batch,
                  const TrainConfig& cfg, LossValue* value) {
    auto& tape = predicted.tape();
    if (predicted.value().rows() != targets.size())
        fail(ErrorKind::BatchShapeError, "prediction/target count mismatch");
    Var y = tape.constant(Tensor::column(targets));
    Var data = ad::mean(ad::square(ad::sub(predicted, y)));
    auto phys = cfg.arch == Arch::Pinn ? physics::pinn_physics_loss(predicted, batch, cfg.constants)
                                       : physics::pikan_physics_loss(predicted, batch, cfg.constants);
    Var total = ad::add(ad::scale(data, cfg.lambda_data), ad::scale(phys.total, cfg.lambda_physics));
    if (value) {
        value->data = data.value().item();
        value->physics = phys.total.value().item();
        value->total = total.value().item();
        value->residuals = phys.residuals;
    }
    return total;
}

LossValue evaluate_validation(const models::Regressor& model, const std::vector<BridgeSample>& val,
                              const TrainConfig& cfg) {
    if (val.empty()) fail(ErrorKind::ContractError, "empty validation set");
    std::vector<FeatureVector> feats;
    std::vector<double> targets;
    std::vector<BridgeParameters> params;
    for (const auto& s : val) {
        feats.push_back(to_feature_vector(s.params));
        targets.push_back(s.weight_g);
        params.push_back(s.params);
    }
    const auto preds = model.predict(feats);
    ad::Tape tape;
    LossValue v;
    combined_loss(tape.constant(Tensor::column(preds)), targets, params, cfg, &v);
    return v;
}

// ---- training loop -----------------------------------------------------------

namespace {

std::vector<std::pair<std::string, double>> residual_terms(Arch arch, const physics::PhysicsResiduals& r) {
    return arch == Arch::Pinn ? r.pinn_terms() : r.pikan_terms();
}

// Batches of batch_size; a trailing singleton joins the previous batch
// because train-mode batch normalization needs two rows.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        const std::size_t end = std::min(order.size(), i + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() > 1 && batches.back().size() == 1) {
        batches[batches.size() - 2].push_back(batches.back().front());
        batches.pop_back();
    }
    return batches;
}

}  // namespace

TrainResult train(const Dataset& ds, const TrainConfig& cfg, std::ostream* log) {
    cfg.validate();
    if (!ds.split) fail(ErrorKind::ContractError, "dataset has no train/test split");
    std::vector<std::size_t> train_idx = ds.split->train;
    if (train_idx.empty()) fail(ErrorKind::ContractError, "empty training set");

    TrainResult result;
    Rng split_rng = derive_rng(cfg.seed, 0x7A11);
    shuffle(train_idx, split_rng);
    std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(train_idx.size())));
    if (n_val >= train_idx.size()) n_val = 0;
    result.validation_indices.assign(train_idx.begin(), train_idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    result.fit_indices.assign(train_idx.begin() + static_cast<std::ptrdiff_t>(n_val), train_idx.end());
    const auto& fit = result.fit_indices;
    if (fit.size() < 2) fail(ErrorKind::ContractError, "training set too small (need >= 2 samples)");
    if (log && fit.size() < 2 * cfg.batch_size)
        *log << "warning: training set of " << fit.size() << " is smaller than 2 x batch_size\n";

    auto model = models::make_model(cfg.arch, cfg.seed);
    model->stats = ds.stats ? *ds.stats : standardize_fit(ds.features(ds.split->train));
    {
        const auto w = ds.weights(fit);
        const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
        double ss = 0.0;
        for (double x : w) ss += (x - mean) * (x - mean);
        const double sd = std::sqrt(ss / static_cast<double>(w.size()));
        model->target = {mean, sd > 0.0 ? sd : 1.0};
    }

    // Pre-compute standardized rows for every fit sample.
    std::vector<std::vector<double>> x_rows(ds.size());
    for (auto i : fit) {
        const auto z = standardize_apply(to_feature_vector(ds.samples[i].params), model->stats);
        x_rows[i].assign(z.begin(), z.end());
    }
    std::vector<BridgeSample> val_samples;
    for (auto i : result.validation_indices) val_samples.push_back(ds.samples[i]);

    ad::Adam adam(cfg.learning_rate);
    Rng rng = derive_rng(cfg.seed, 0x7EA1);
    double best_val = std::numeric_limits<double>::infinity();
    std::unique_ptr<models::Regressor> best_model;
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = fit;
        shuffle(order, rng);
        const auto batches = make_batches(order, cfg.batch_size);

        double sum_data = 0.0, sum_phys = 0.0;
        std::vector<double> sum_res;
        std::vector<std::string> res_names;
        std::size_t seen = 0;

        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& batch = batches[b];
            Tensor x = Tensor::zeros(batch.size(), kFeatureCount);
            std::vector<double> targets;
            std::vector<BridgeParameters> params;
            for (std::size_t r = 0; r < batch.size(); ++r) {
                for (std::size_t k = 0; k < kFeatureCount; ++k) x(r, k) = x_rows[batch[r]][k];
                targets.push_back(ds.samples[batch[r]].weight_g);
                params.push_back(ds.samples[batch[r]].params);
            }

            ad::Tape tape;
            const auto vars = model->bind(tape);
            std::vector<ad::BatchMoments> moments;
            models::ForwardContext ctx{models::Mode::Train, &rng, &moments};
            Var pred = model->forward(tape, vars, x, ctx);
            LossValue lv;
            Var loss = combined_loss(pred, targets, params, cfg, &lv);
            if (!std::isfinite(lv.total))
                fail(ErrorKind::NumericalError, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                                    std::to_string(b + 1));
            tape.backward(loss);
            std::vector<Tensor> grads;
            grads.reserve(vars.size());
            for (const auto& v : vars) grads.push_back(tape.grad(v));
            if (cfg.clip_norm) ad::clip_grad_norm(grads, *cfg.clip_norm);
            try {
                adam.step(model->parameters(), grads);
            } catch (const Error& e) {
                fail(ErrorKind::NumericalError, "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1) +
                                                    ": " + e.what());
            }
            model->apply_batch_moments(moments);

            const double w = static_cast<double>(batch.size());
            sum_data += w * lv.data;
            sum_phys += w * lv.physics;
            const auto terms = residual_terms(cfg.arch, lv.residuals);
            if (sum_res.empty()) {
                sum_res.assign(terms.size(), 0.0);
                for (const auto& t : terms) res_names.push_back(t.first);
            }
            for (std::size_t k = 0; k < terms.size(); ++k) sum_res[k] += w * terms[k].second;
            seen += batch.size();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        const double n = static_cast<double>(seen);
        rec.data_loss = sum_data / n;
        rec.physics_loss = sum_phys / n;
        rec.total_loss = cfg.lambda_data * rec.data_loss + cfg.lambda_physics * rec.physics_loss;
        for (std::size_t k = 0; k < sum_res.size(); ++k) rec.residuals.emplace_back(res_names[k], sum_res[k] / n);
        rec.val_loss = val_samples.empty() ? rec.total_loss : evaluate_validation(*model, val_samples, cfg).total;
        if (!std::isfinite(rec.val_loss))
            fail(ErrorKind::NumericalError, "non-finite validation loss at epoch " + std::to_string(epoch));
        result.history.epochs.push_back(rec);

        if (log && (epoch == 1 || epoch % 20 == 0 || epoch == cfg.epochs))
            *log << "epoch " << epoch << "  data " << rec.data_loss << "  physics " << rec.physics_loss << "  val "
                 << rec.val_loss << '\n';

        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            result.best_epoch = epoch;
            if (cfg.early_stopping) best_model = model->clone();
            since_best = 0;
        } else if (cfg.early_stopping && ++since_best >= cfg.patience) {
            if (log) *log << "early stopping at epoch " << epoch << " (best " << result.best_epoch << ")\n";
            break;
        }
    }

    if (cfg.early_stopping && best_model) model = std::move(best_model);
    if (!cfg.early_stopping) result.best_epoch = static_cast<int>(result.history.epochs.size());
    model->trained = true;
    result.model = std::move(model);
    return result;
}

}  // namespace pinnbridge::training
