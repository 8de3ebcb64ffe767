#include "pinnbridge/models.hpp"

#include <cmath>

#include "pinnbridge/error.hpp"

namespace pinnbridge::models {

using ad::Tensor;
using ad::Var;

std::string_view arch_tag(Arch arch) { return arch == Arch::Pinn ? "pinn" : "pikan"; }

Arch parse_arch(std::string_view tag) {
    if (tag == "pinn") return Arch::Pinn;
    if (tag == "pikan") return Arch::Pikan;
    fail(ErrorKind::InvalidConfig, "unknown architecture '" + std::string(tag) + "' (expected pinn or pikan)");
}

// ---- polynomial expansion ----------------------------------------------------

std::size_t polynomial_dimension(std::size_t n, int degree) {
    if (degree < 1) fail(ErrorKind::InvalidConfig, "polynomial degree must be >= 1");
    if (degree > 3) fail(ErrorKind::Unsupported, "polynomial degree above 3 is not supported");
    std::size_t d = n;
    if (degree >= 2) d += n + n * (n - 1) / 2;
    if (degree >= 3) d += n;
    return d;
}

std::vector<double> polynomial_expand(std::span<const double> x, int degree) {
    const std::size_t n = x.size();
    std::vector<double> out;
    out.reserve(polynomial_dimension(n, degree));
    out.assign(x.begin(), x.end());
    if (degree >= 2) {
        for (double v : x) out.push_back(v * v);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) out.push_back(x[i] * x[j]);
    }
    if (degree >= 3)
        for (double v : x) out.push_back(v * v * v);
    return out;
}

Tensor polynomial_expand(const Tensor& batch, int degree) {
    const std::size_t rows = batch.rows(), n = batch.cols();
    const std::size_t d = polynomial_dimension(n, degree);
    Tensor out = Tensor::zeros(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = polynomial_expand(batch.values().subspan(r * n, n), degree);
        for (std::size_t c = 0; c < d; ++c) out(r, c) = row[c];
    }
    return out;
}

Tensor dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorKind::InvalidConfig, "dropout rate must lie in [0, 1)");
    Tensor mask = Tensor::zeros(rows, cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (auto& m : mask.values()) m = uniform01(rng) < rate ? 0.0 : keep_scale;
    return mask;
}

// ---- shared layer helpers ------------------------------------------------------

namespace {

Dense glorot_dense(std::size_t in, std::size_t out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Dense d{Tensor::zeros(in, out), Tensor::zeros(1, out)};
    for (auto& w : d.weight.values()) w = uniform(rng, -limit, limit);
    return d;
}

BatchNorm fresh_norm(std::size_t n) {
    return BatchNorm{Tensor({1, n}, 1.0), Tensor::zeros(1, n), Tensor::zeros(1, n), Tensor({1, n}, 1.0)};
}

struct Cursor {
    std::span<const Var> params;
    std::size_t pos = 0;
    Var next() {
        if (pos >= params.size()) fail(ErrorKind::ContractError, "forward: too few bound parameters");
        return params[pos++];
    }
};

Var dense(Var h, Cursor& c) {
    Var w = c.next();
    Var b = c.next();
    return ad::add_row(ad::matmul(h, w), b);
}

Var norm(Var h, const BatchNorm& bn, Cursor& c, ForwardContext& ctx) {
    Var gamma = c.next();
    Var beta = c.next();
    if (ctx.mode == Mode::Train) {
        ad::BatchMoments m;
        Var out = ad::batch_norm(h, gamma, beta, kBatchNormEps, &m);
        if (ctx.moments) ctx.moments->push_back(std::move(m));
        return out;
    }
    return ad::batch_norm_fixed(h, gamma, beta, bn.running_mean, bn.running_var, kBatchNormEps);
}

Var dropout(Var h, double rate, ForwardContext& ctx) {
    if (ctx.mode != Mode::Train || rate <= 0.0) return h;
    if (!ctx.rng) fail(ErrorKind::ContractError, "train-mode forward needs an RNG for dropout");
    const auto& v = h.value();
    return ad::mul(h, h.tape().constant(dropout_mask(v.rows(), v.cols(), rate, *ctx.rng)));
}

Var to_grams(Var raw, const TargetScaling& t) {
    return ad::add_scalar(ad::scale(raw, t.scale), t.mean);
}

void check_input(const Tensor& x, std::size_t width, Mode mode) {
    if (x.rank() != 2 || x.cols() != width)
        fail(ErrorKind::ShapeError, "model input must be (batch x " + std::to_string(width) + "), got " +
                                        x.shape_string());
    if (x.rows() == 0) fail(ErrorKind::ContractError, "empty batch");
    if (mode == Mode::Train && x.rows() < 2)
        fail(ErrorKind::ContractError, "train-mode batch needs at least 2 samples for batch normalization");
}

nlohmann::json sizes_json(const std::vector<std::size_t>& v) { return nlohmann::json(v); }

}  // namespace

// ---- Regressor -----------------------------------------------------------------

std::vector<Tensor*> Regressor::parameters() { return trainables(); }

std::vector<const Tensor*> Regressor::parameters() const {
    auto ps = const_cast<Regressor*>(this)->trainables();
    return {ps.begin(), ps.end()};
}

std::size_t Regressor::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
}

std::vector<Var> Regressor::bind(ad::Tape& tape) const {
    std::vector<Var> vars;
    for (const auto* p : parameters()) vars.push_back(tape.variable(*p));
    return vars;
}

void Regressor::apply_batch_moments(const std::vector<ad::BatchMoments>& moments) {
    auto norms = batch_norms();
    if (moments.size() != norms.size())
        fail(ErrorKind::ContractError, "expected " + std::to_string(norms.size()) + " batch-norm moment sets, got " +
                                           std::to_string(moments.size()));
    for (std::size_t k = 0; k < norms.size(); ++k) {
        auto rm = norms[k]->running_mean.values();
        auto rv = norms[k]->running_var.values();
        for (std::size_t j = 0; j < rm.size(); ++j) {
            rm[j] = kBatchNormMomentum * rm[j] + (1.0 - kBatchNormMomentum) * moments[k].mean[j];
            rv[j] = kBatchNormMomentum * rv[j] + (1.0 - kBatchNormMomentum) * moments[k].variance[j];
        }
    }
}

std::vector<double> Regressor::predict_standardized(const Tensor& x_std) const {
    ad::Tape tape;
    std::vector<Var> vars;
    for (const auto* p : parameters()) vars.push_back(tape.constant(*p));
    ForwardContext ctx{Mode::Infer, nullptr, nullptr};
    Var out = forward(tape, vars, x_std, ctx);
    const auto& v = out.value();
    return {v.values().begin(), v.values().end()};
}

Tensor Regressor::standardize(const std::vector<FeatureVector>& raw) const {
    Tensor x = Tensor::zeros(raw.size(), kFeatureCount);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto z = standardize_apply(raw[i], stats);
        for (std::size_t k = 0; k < kFeatureCount; ++k) x(i, k) = z[k];
    }
    return x;
}

std::vector<double> Regressor::predict(const std::vector<FeatureVector>& raw) const {
    if (raw.empty()) return {};
    return predict_standardized(standardize(raw));
}

double Regressor::predict(const BridgeParameters& params) const {
    return predict(std::vector<FeatureVector>{to_feature_vector(params)}).front();
}

// ---- PINN ------------------------------------------------------------------------

PinnModel::PinnModel(PinnConfig config, std::uint64_t seed) : config_(std::move(config)) {
    if (config_.hidden.empty()) fail(ErrorKind::InvalidConfig, "PINN needs at least one hidden layer");
    Rng rng = derive_rng(seed, 0x9171);
    std::size_t in = kFeatureCount;
    for (auto width : config_.hidden) {
        hidden_.push_back(glorot_dense(in, width, rng));
        norms_.push_back(fresh_norm(width));
        in = width;
    }
    output_ = glorot_dense(in, 1, rng);
    // Start at the target mean so early epochs fit signal instead of undoing a random projection.
    for (auto& w : output_.weight.values()) w = 0.0;
}

nlohmann::json PinnModel::config_json() const {
    return {{"hidden", sizes_json(config_.hidden)}, {"dropout", config_.dropout}};
}

std::vector<Tensor*> PinnModel::trainables() {
    std::vector<Tensor*> out;
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
        out.push_back(&hidden_[i].weight);
        out.push_back(&hidden_[i].bias);
        out.push_back(&norms_[i].gamma);
        out.push_back(&norms_[i].beta);
    }
    out.push_back(&output_.weight);
    out.push_back(&output_.bias);
    return out;
}

std::vector<BatchNorm*> PinnModel::batch_norms() {
    std::vector<BatchNorm*> out;
    for (auto& n : norms_) out.push_back(&n);
    return out;
}

std::vector<NamedTensor> PinnModel::named_tensors() {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
        const std::string p = "hidden" + std::to_string(i);
        out.push_back({p + ".weight", &hidden_[i].weight});
        out.push_back({p + ".bias", &hidden_[i].bias});
        out.push_back({p + ".bn.gamma", &norms_[i].gamma});
        out.push_back({p + ".bn.beta", &norms_[i].beta});
        out.push_back({p + ".bn.running_mean", &norms_[i].running_mean});
        out.push_back({p + ".bn.running_var", &norms_[i].running_var});
    }
    out.push_back({"output.weight", &output_.weight});
    out.push_back({"output.bias", &output_.bias});
    return out;
}

Var PinnModel::forward(ad::Tape& tape, std::span<const Var> params, const Tensor& x_std,
                       ForwardContext& ctx) const {
    check_input(x_std, kFeatureCount, ctx.mode);
    Cursor c{params};
    Var h = tape.constant(x_std);
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
        h = ad::relu(dense(h, c));
        h = norm(h, norms_[i], c, ctx);
        h = dropout(h, config_.dropout, ctx);
    }
    return to_grams(dense(h, c), target);
}

// ---- PIKAN -----------------------------------------------------------------------

PikanModel::PikanModel(PikanConfig config, std::uint64_t seed) : config_(std::move(config)) {
    if (config_.branches == 0) fail(ErrorKind::InvalidConfig, "PIKAN needs at least one branch");
    const std::size_t expanded = polynomial_dimension(kFeatureCount, config_.degree);
    Rng rng = derive_rng(seed, 0x91CA);
    for (std::size_t b = 0; b < config_.branches; ++b) {
        Branch br;
        std::size_t in = expanded;
        for (auto width : config_.branch_hidden) {
            br.hidden.push_back(glorot_dense(in, width, rng));
            br.norms.push_back(fresh_norm(width));
            in = width;
        }
        br.output = glorot_dense(in, 1, rng);
        branches_.push_back(std::move(br));
    }
    std::size_t in = config_.branches;
    for (auto width : config_.aggregator_hidden) {
        aggregator_.push_back(glorot_dense(in, width, rng));
        in = width;
    }
    output_ = glorot_dense(in, 1, rng);
}

nlohmann::json PikanModel::config_json() const {
    return {{"degree", config_.degree},
            {"branches", config_.branches},
            {"branch_hidden", sizes_json(config_.branch_hidden)},
            {"branch_dropout", config_.branch_dropout},
            {"aggregator_hidden", sizes_json(config_.aggregator_hidden)},
            {"aggregator_dropout", config_.aggregator_dropout}};
}

std::vector<Tensor*> PikanModel::trainables() {
    std::vector<Tensor*> out;
    for (auto& br : branches_) {
        for (std::size_t i = 0; i < br.hidden.size(); ++i) {
            out.push_back(&br.hidden[i].weight);
            out.push_back(&br.hidden[i].bias);
            out.push_back(&br.norms[i].gamma);
            out.push_back(&br.norms[i].beta);
        }
        out.push_back(&br.output.weight);
        out.push_back(&br.output.bias);
    }
    for (auto& d : aggregator_) {
        out.push_back(&d.weight);
        out.push_back(&d.bias);
    }
    out.push_back(&output_.weight);
    out.push_back(&output_.bias);
    return out;
}

std::vector<BatchNorm*> PikanModel::batch_norms() {
    std::vector<BatchNorm*> out;
    for (auto& br : branches_)
        for (auto& n : br.norms) out.push_back(&n);
    return out;
}

std::vector<NamedTensor> PikanModel::named_tensors() {
    std::vector<NamedTensor> out;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        auto& br = branches_[b];
        const std::string pb = "branch" + std::to_string(b);
        for (std::size_t i = 0; i < br.hidden.size(); ++i) {
            const std::string p = pb + ".dense" + std::to_string(i);
            out.push_back({p + ".weight", &br.hidden[i].weight});
            out.push_back({p + ".bias", &br.hidden[i].bias});
            out.push_back({p + ".bn.gamma", &br.norms[i].gamma});
            out.push_back({p + ".bn.beta", &br.norms[i].beta});
            out.push_back({p + ".bn.running_mean", &br.norms[i].running_mean});
            out.push_back({p + ".bn.running_var", &br.norms[i].running_var});
        }
        out.push_back({pb + ".output.weight", &br.output.weight});
        out.push_back({pb + ".output.bias", &br.output.bias});
    }
    for (std::size_t i = 0; i < aggregator_.size(); ++i) {
        const std::string p = "aggregator.dense" + std::to_string(i);
        out.push_back({p + ".weight", &aggregator_[i].weight});
        out.push_back({p + ".bias", &aggregator_[i].bias});
    }
    out.push_back({"output.weight", &output_.weight});
    out.push_back({"output.bias", &output_.bias});
    return out;
}

std::vector<Var> PikanModel::run_branches(ad::Tape& tape, std::span<const Var> params, const Tensor& x_std,
                                          ForwardContext& ctx, std::size_t& cursor) const {
    check_input(x_std, kFeatureCount, ctx.mode);
    Var expanded = tape.constant(polynomial_expand(x_std, config_.degree));
    Cursor c{params, cursor};
    std::vector<Var> outs;
    for (const auto& br : branches_) {
        Var h = expanded;
        for (std::size_t i = 0; i < br.hidden.size(); ++i) {
            h = ad::tanh(dense(h, c));
            h = norm(h, br.norms[i], c, ctx);
            h = dropout(h, config_.branch_dropout, ctx);
        }
        outs.push_back(dense(h, c));
    }
    cursor = c.pos;
    return outs;
}

Var PikanModel::forward(ad::Tape& tape, std::span<const Var> params, const Tensor& x_std,
                        ForwardContext& ctx) const {
    std::size_t cursor = 0;
    const auto outs = run_branches(tape, params, x_std, ctx, cursor);
    Cursor c{params, cursor};
    Var h = ad::concat_cols(outs);
    for (std::size_t i = 0; i < aggregator_.size(); ++i) {
        h = ad::relu(dense(h, c));
        h = dropout(h, config_.aggregator_dropout, ctx);
    }
    return to_grams(dense(h, c), target);
}

Tensor PikanModel::branch_outputs(const Tensor& x_std) const {
    ad::Tape tape;
    std::vector<Var> vars;
    for (const auto* p : parameters()) vars.push_back(tape.constant(*p));
    ForwardContext ctx{Mode::Infer, nullptr, nullptr};
    std::size_t cursor = 0;
    const auto outs = run_branches(tape, vars, x_std, ctx, cursor);
    return ad::concat_cols(outs).value();
}

std::unique_ptr<Regressor> make_model(Arch arch, std::uint64_t seed) {
    if (arch == Arch::Pinn) return std::make_unique<PinnModel>(PinnConfig{}, seed);
    return std::make_unique<PikanModel>(PikanConfig{}, seed);
}

Tensor branch_response(const PikanModel& model, std::size_t feature_index, std::span<const double> sweep,
                       const FeatureVector& baseline_std) {
    if (feature_index >= kFeatureCount)
        fail(ErrorKind::ContractError, "feature index " + std::to_string(feature_index) + " out of range");
    if (sweep.empty()) return Tensor::zeros(0, model.config().branches);
    Tensor x = Tensor::zeros(sweep.size(), kFeatureCount);
    for (std::size_t r = 0; r < sweep.size(); ++r) {
        for (std::size_t k = 0; k < kFeatureCount; ++k) x(r, k) = baseline_std[k];
        x(r, feature_index) = sweep[r];
    }
    return model.branch_outputs(x);
}

}  // namespace pinnbridge::models
