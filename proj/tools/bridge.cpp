// bridge: command-line driver for data preparation, training, evaluation,
// prediction, image extraction and serving.
//
// Exit codes: 0 success, 1 runtime/data failure, 2 usage or configuration error.
// stdout carries JSON only; diagnostics go to stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pinnbridge/data.hpp"
#include "pinnbridge/error.hpp"
#include "pinnbridge/eval.hpp"
#include "pinnbridge/models.hpp"
#include "pinnbridge/service.hpp"
#include "pinnbridge/training.hpp"
#include "pinnbridge/vision.hpp"

namespace fs = std::filesystem;
using namespace pinnbridge;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

std::string read_all(std::istream& in) { return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}; }

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorKind::IoError, "cannot open " + p.string());
    return read_all(f);
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorKind::IoError, "cannot open " + p.string() + " for writing");
    f << text;
}

// ---- subcommand options ---------------------------------------------------------

struct SynthesizeOpts {
    std::size_t count = 15;
    std::uint64_t seed = 42;
    fs::path out;
};

struct AugmentOpts {
    fs::path in, out;
    std::size_t count = 100;
    std::uint64_t seed = 42;
    double variation = 0.10;
    double noise = 0.01;
};

struct TrainOpts {
    fs::path data, out, history;
    std::string arch = "pikan";
    std::uint64_t seed = 42;
    std::optional<std::uint64_t> split_seed;
    double test_fraction = 0.2;
    std::optional<int> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> learning_rate;
    std::optional<double> lambda_physics;
    std::optional<int> patience;
    bool no_early_stopping = false;
    std::optional<double> clip_norm;
};

struct EvaluateOpts {
    fs::path model, data, report;
    std::string subset = "all";
};

struct PredictOpts {
    fs::path model;
    fs::path input;  // empty: stdin
};

struct ExtractOpts {
    fs::path image;
    double scale = 0.0;
    fs::path stages;
    int fast_threshold = 20;
    double cluster_radius = 20.0;
    double zone_tolerance = 10.0;
};

struct ServeOpts {
    std::vector<fs::path> models;
    fs::path metrics;
    std::string bind;
    fs::path static_dir;
    std::size_t max_upload = 8u << 20;
    int workers = 4;
};

struct ReportOpts {
    fs::path history;
    fs::path out;
};

// ---- subcommands ------------------------------------------------------------------

int run_synthesize(const SynthesizeOpts& o) {
    const auto ds = data::synthesize(o.seed, o.count);
    data::save_csv(ds, o.out);
    emit({{"command", "synthesize"}, {"count", ds.size()}, {"seed", o.seed}, {"out", o.out.string()}});
    return kExitOk;
}

int run_augment(const AugmentOpts& o) {
    require_file(o.in, "input CSV");
    const auto src = data::load_csv(o.in);
    data::AugmentConfig cfg;
    cfg.target_count = o.count;
    cfg.seed = o.seed;
    cfg.variation_fraction = o.variation;
    cfg.noise_sigma_fraction = o.noise;
    const auto out = data::augment(src, cfg);
    data::save_csv(out, o.out);
    std::cerr << "augmented " << src.size() << " -> " << out.size() << " samples\n";
    emit({{"command", "augment"}, {"source_count", src.size()}, {"output_count", out.size()}, {"out", o.out.string()}});
    return kExitOk;
}

int run_train(const TrainOpts& o) {
    require_file(o.data, "data CSV");
    const auto arch = models::parse_arch(o.arch);
    auto cfg = training::TrainConfig::defaults(arch);
    cfg.seed = o.seed;
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.batch_size) cfg.batch_size = *o.batch_size;
    if (o.learning_rate) cfg.learning_rate = *o.learning_rate;
    if (o.lambda_physics) {
        cfg.lambda_physics = *o.lambda_physics;
        cfg.lambda_data = 1.0 - *o.lambda_physics;
    }
    if (o.patience) cfg.patience = *o.patience;
    if (o.no_early_stopping) cfg.early_stopping = false;
    cfg.clip_norm = o.clip_norm;
    cfg.validate();

    const auto split_seed = o.split_seed.value_or(o.seed);
    const auto ds = split_train_test(data::load_csv(o.data), o.test_fraction, split_seed);
    std::cerr << "training " << o.arch << " on " << ds.split->train.size() << " samples (" << ds.split->test.size()
              << " held out)\n";
    auto result = training::train(ds, cfg, &std::cerr);

    const auto test = ds.subset(ds.split->test);
    const auto m = eval::compute_metrics(test.weights(), result.model->predict(test.features()));
    auto metrics = eval::to_json(m);
    metrics["subset"] = "test";
    metrics["split"] = {{"seed", split_seed}, {"test_fraction", o.test_fraction}, {"rows", ds.size()}};
    metrics["best_epoch"] = result.best_epoch;
    metrics["epochs_run"] = result.history.epochs.size();

    models::save(*result.model, o.out, metrics, result.history.to_json());
    if (!o.history.empty()) write_file(o.history, result.history.to_csv());
    emit({{"command", "train"}, {"arch", o.arch}, {"model", o.out.string()}, {"metrics", metrics}});
    return kExitOk;
}

int run_evaluate(const EvaluateOpts& o) {
    require_file(o.model, "model file");
    require_file(o.data, "data CSV");
    const auto file = models::load(o.model);
    auto ds = data::load_csv(o.data);
    if (o.subset == "test") {
        const auto split = file.metrics.is_object() ? file.metrics.value("split", json()) : json();
        if (!split.is_object()) throw UsageError("model file records no split; use --subset all");
        if (split.value("rows", std::size_t{0}) != ds.size())
            throw Error(ErrorKind::InvalidConfig, "data row count differs from the split recorded in the model");
        ds = split_train_test(ds, split.at("test_fraction").get<double>(), split.at("seed").get<std::uint64_t>());
        ds = ds.subset(ds.split->test);
    }
    std::optional<training::LossHistory> history;
    if (!file.history.is_null()) history = training::LossHistory::from_json(file.history);
    auto doc = eval::write_report(*file.model, ds, history ? &*history : nullptr, o.report);
    doc["subset"] = o.subset;
    emit({{"command", "evaluate"}, {"report", o.report.string()}, {"metrics", doc}});
    return kExitOk;
}

int run_predict(const PredictOpts& o) {
    require_file(o.model, "model file");
    service::Service svc;
    svc.load_model(o.model);
    const std::string body = o.input.empty() ? read_all(std::cin) : read_file(o.input);
    const auto r = svc.predict(body);
    std::cout << json::parse(r.body).dump(2) << '\n';
    if (r.status == 200) return kExitOk;
    return kExitRuntime;
}

int run_extract(const ExtractOpts& o) {
    require_file(o.image, "image");
    vision::PipelineConfig cfg;
    cfg.fast_threshold = o.fast_threshold;
    cfg.cluster_radius_px = o.cluster_radius;
    cfg.zone_tolerance_px = o.zone_tolerance;
    const auto img = vision::read_image(o.image);
    const auto ex = vision::extract_parameters(img, o.scale, cfg, !o.stages.empty());
    if (ex.stages) vision::write_stages(*ex.stages, o.stages);
    emit(vision::to_json(ex));
    return kExitOk;
}

int run_serve(ServeOpts o) {
    if (o.models.empty())
        if (const char* env = std::getenv("BRIDGE_MODEL_PATH"); env && *env) o.models.emplace_back(env);
    if (o.bind.empty()) {
        const char* env = std::getenv("BRIDGE_BIND");
        o.bind = env && *env ? env : "127.0.0.1:8080";
    }
    service::ServiceConfig cfg;
    cfg.max_upload_bytes = o.max_upload;
    cfg.extract_workers = o.workers;
    if (!o.static_dir.empty()) {
        if (!fs::is_directory(o.static_dir)) throw UsageError("static directory not found: " + o.static_dir.string());
        cfg.static_dir = o.static_dir;
    }
    service::Service svc(cfg);
    std::optional<json> metrics;
    if (!o.metrics.empty()) {
        require_file(o.metrics, "metrics file");
        metrics = json::parse(read_file(o.metrics));
    }
    for (const auto& p : o.models) {
        require_file(p, "model file");
        svc.load_model(p, std::nullopt, metrics);
    }
    if (!svc.has_model()) std::cerr << "warning: no model loaded; /api/predict will answer 503\n";
    const auto bind = service::parse_bind(o.bind);
    std::cerr << "listening on http://" << bind.host << ':' << bind.port << '\n';
    if (!service::serve(svc, bind)) {
        std::cerr << "error: cannot bind " << o.bind << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int run_report(const ReportOpts& o) {
    require_file(o.history, "history file");
    training::LossHistory history;
    if (o.history.extension() == ".csv") {
        std::ifstream f(o.history);
        history = training::LossHistory::from_csv(f);
    } else {
        const auto j = json::parse(read_file(o.history));
        // Accept a model file with embedded history or a bare history document.
        history = training::LossHistory::from_json(j.contains("history") ? j.at("history") : j);
    }
    fs::create_directories(o.out);
    write_file(o.out / "loss_history.csv", history.to_csv());
    write_file(o.out / eval::kContributionFile, eval::contribution_csv(eval::physics_contribution_report(history)));
    emit({{"command", "report"},
          {"epochs", history.epochs.size()},
          {"files", {(o.out / "loss_history.csv").string(), (o.out / eval::kContributionFile).string()}}});
    return kExitOk;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidConfig:
        case ErrorKind::Unsupported: return kExitUsage;
        default: return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-informed bridge weight regression"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    SynthesizeOpts syn;
    auto* c_syn = app.add_subcommand("synthesize", "Generate a synthetic source dataset");
    c_syn->add_option("--count,-n", syn.count, "Number of bridges")->capture_default_str();
    c_syn->add_option("--seed", syn.seed, "RNG seed")->capture_default_str();
    c_syn->add_option("--out", syn.out, "Output CSV")->required();

    AugmentOpts aug;
    auto* c_aug = app.add_subcommand("augment", "Grow a dataset by jitter, weight rescaling and noise");
    c_aug->add_option("--in", aug.in, "Source CSV")->required();
    c_aug->add_option("--out", aug.out, "Output CSV")->required();
    c_aug->add_option("--count", aug.count, "Target sample count")->capture_default_str();
    c_aug->add_option("--seed", aug.seed, "RNG seed")->capture_default_str();
    c_aug->add_option("--variation", aug.variation, "Geometric jitter fraction")->capture_default_str();
    c_aug->add_option("--noise", aug.noise, "Gaussian noise, fraction of feature std")->capture_default_str();

    TrainOpts tr;
    auto* c_tr = app.add_subcommand("train", "Train a PINN or PIKAN model");
    c_tr->add_option("--data", tr.data, "Training CSV")->required();
    c_tr->add_option("--arch", tr.arch, "pinn or pikan")->check(CLI::IsMember({"pinn", "pikan"}))->capture_default_str();
    c_tr->add_option("--out", tr.out, "Model file to write")->required();
    c_tr->add_option("--history", tr.history, "Loss history CSV to write");
    c_tr->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
    c_tr->add_option("--split-seed", tr.split_seed, "Train/test split seed (default: --seed)");
    c_tr->add_option("--test-fraction", tr.test_fraction, "Held-out fraction")->capture_default_str();
    c_tr->add_option("--epochs", tr.epochs, "Override epoch count");
    c_tr->add_option("--batch-size", tr.batch_size, "Override batch size");
    c_tr->add_option("--lr", tr.learning_rate, "Override Adam learning rate");
    c_tr->add_option("--lambda-physics", tr.lambda_physics, "Physics weight; data weight becomes 1 - value");
    c_tr->add_option("--patience", tr.patience, "Early-stopping patience");
    c_tr->add_flag("--no-early-stopping", tr.no_early_stopping, "Run every epoch");
    c_tr->add_option("--clip-norm", tr.clip_norm, "Global gradient-norm clip");

    EvaluateOpts ev;
    auto* c_ev = app.add_subcommand("evaluate", "Write metrics and diagnostic reports");
    c_ev->add_option("--model", ev.model, "Model file")->required();
    c_ev->add_option("--data", ev.data, "Evaluation CSV")->required();
    c_ev->add_option("--report", ev.report, "Report directory")->required();
    c_ev->add_option("--subset", ev.subset, "all rows, or the test split recorded at training")
        ->check(CLI::IsMember({"all", "test"}))
        ->capture_default_str();

    PredictOpts pr;
    auto* c_pr = app.add_subcommand("predict", "Predict weight for parameters given as JSON (stdin by default)");
    c_pr->add_option("--model", pr.model, "Model file")->required();
    c_pr->add_option("--input", pr.input, "JSON file instead of stdin");

    ExtractOpts ex;
    auto* c_ex = app.add_subcommand("extract", "Extract bridge parameters from an image");
    c_ex->add_option("--image", ex.image, "PNG or binary PPM")->required();
    c_ex->add_option("--scale", ex.scale, "Millimetres per pixel")->required()->check(CLI::PositiveNumber);
    c_ex->add_option("--stages", ex.stages, "Directory for per-stage PNG dumps");
    c_ex->add_option("--fast-threshold", ex.fast_threshold, "FAST intensity threshold")->capture_default_str();
    c_ex->add_option("--cluster-radius", ex.cluster_radius, "Corner merge radius (px)")->capture_default_str();
    c_ex->add_option("--zone-tolerance", ex.zone_tolerance, "Chord retention tolerance (px)")->capture_default_str();

    ServeOpts sv;
    auto* c_sv = app.add_subcommand("serve", "Run the HTTP API");
    c_sv->add_option("--model", sv.models, "Model file(s); default $BRIDGE_MODEL_PATH");
    c_sv->add_option("--metrics", sv.metrics, "Evaluation metrics.json to publish instead of the embedded metrics");
    c_sv->add_option("--bind", sv.bind, "host:port; default $BRIDGE_BIND or 127.0.0.1:8080");
    c_sv->add_option("--static", sv.static_dir, "Directory served at /");
    c_sv->add_option("--max-upload", sv.max_upload, "Image upload cap in bytes")->capture_default_str();
    c_sv->add_option("--workers", sv.workers, "Concurrent extraction jobs")->capture_default_str();

    ReportOpts rp;
    auto* c_rp = app.add_subcommand("report", "Regenerate figure inputs from a loss history");
    c_rp->add_option("--history", rp.history, "History CSV, history JSON or model file")->required();
    c_rp->add_option("--out", rp.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*c_syn) return run_synthesize(syn);
        if (*c_aug) return run_augment(aug);
        if (*c_tr) return run_train(tr);
        if (*c_ev) return run_evaluate(ev);
        if (*c_pr) return run_predict(pr);
        if (*c_ex) return run_extract(ex);
        if (*c_sv) return run_serve(sv);
        if (*c_rp) return run_report(rp);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
