#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pinnbridge/data.hpp"
#include "pinnbridge/error.hpp"
#include "pinnbridge/eval.hpp"
#include "pinnbridge/models.hpp"
#include "pinnbridge/params_json.hpp"
#include "pinnbridge/physics.hpp"
#include "pinnbridge/training.hpp"
#include "pinnbridge/vision.hpp"

namespace py = pybind11;
using namespace pinnbridge;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python package decodes it.

Dataset dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    return data::read_csv(in);
}

std::string dataset_to_csv(const Dataset& ds) {
    std::ostringstream out;
    data::write_csv(ds, out);
    return out.str();
}

struct Model {
    std::shared_ptr<models::Regressor> model;
    json metrics;
    json history;

    std::string arch() const { return std::string(models::arch_tag(model->arch())); }

    double predict(const std::string& params_json) const {
        return model->predict(params_from_json(json::parse(params_json)));
    }

    std::vector<double> predict_features(const std::vector<std::vector<double>>& rows) const {
        std::vector<FeatureVector> fv;
        for (const auto& r : rows) {
            if (r.size() != kFeatureCount)
                fail(ErrorKind::ShapeError, "feature rows must have " + std::to_string(kFeatureCount) + " values");
            FeatureVector v{};
            std::copy(r.begin(), r.end(), v.begin());
            fv.push_back(v);
        }
        return model->predict(fv);
    }

    void save(const std::string& path) const { models::save(*model, path, metrics, history); }
};

Model load_model(const std::string& path) {
    auto f = models::load(path);
    return {std::shared_ptr<models::Regressor>(std::move(f.model)), f.metrics, f.history};
}

py::tuple train(const std::string& csv, const std::string& arch, std::uint64_t seed, double test_fraction,
                std::optional<int> epochs, std::optional<double> lambda_physics) {
    auto cfg = training::TrainConfig::defaults(models::parse_arch(arch));
    cfg.seed = seed;
    if (epochs) cfg.epochs = *epochs;
    if (lambda_physics) {
        cfg.lambda_physics = *lambda_physics;
        cfg.lambda_data = 1.0 - *lambda_physics;
    }
    const auto ds = split_train_test(dataset_from_csv(csv), test_fraction, seed);
    training::TrainResult r;
    {
        py::gil_scoped_release release;
        r = training::train(ds, cfg);
    }
    const auto test = ds.subset(ds.split->test);
    auto metrics = eval::to_json(eval::compute_metrics(test.weights(), r.model->predict(test.features())));
    metrics["best_epoch"] = r.best_epoch;
    Model m{std::shared_ptr<models::Regressor>(std::move(r.model)), metrics, r.history.to_json()};
    return py::make_tuple(m, metrics.dump(), r.history.to_csv());
}

std::string physics_residuals(const std::string& params_json, double weight_g, const std::string& arch) {
    const std::vector<BridgeParameters> batch{params_from_json(json::parse(params_json))};
    const std::vector<double> pred{weight_g};
    const auto v = models::parse_arch(arch) == models::Arch::Pinn ? physics::pinn_physics_loss(batch, pred)
                                                                   : physics::pikan_physics_loss(batch, pred);
    json terms = json::object();
    for (const auto& [name, value] : v.residuals.all_terms()) terms[name] = value;
    return json{{"total", v.total}, {"terms", terms}, {"gradient", v.gradient}}.dump();
}

std::string extract(const py::bytes& image, double scale) {
    const std::string buf = image;
    vision::RgbImage img;
    vision::ExtractedParameters ex;
    {
        py::gil_scoped_release release;
        img = vision::decode_image(std::span(reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size()));
        ex = vision::extract_parameters(img, scale);
    }
    return vision::to_json(ex).dump();
}

py::bytes render_truss(const std::vector<std::pair<double, double>>& nodes_mm,
                       const std::vector<std::pair<std::size_t, std::size_t>>& members, double scale_mm_per_px,
                       double line_width_px) {
    vision::RenderSpec spec;
    spec.scale_mm_per_px = scale_mm_per_px;
    spec.line_width_px = line_width_px;
    const auto r = vision::render_truss({nodes_mm, members}, spec);
    const auto png = vision::encode_png(r.image);
    return py::bytes(reinterpret_cast<const char*>(png.data()), png.size());
}

}  // namespace

PYBIND11_MODULE(_pinnbridge, m) {
    m.doc() = "Physics-informed bridge weight regression (C++ core)";

    static py::exception<Error> exc(m, "PinnbridgeError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(exc.ptr(), e.what());
        } catch (const json::exception& e) {
            PyErr_SetString(exc.ptr(), (std::string("ParseError: ") + e.what()).c_str());
        }
    });

    m.def("feature_names", [] {
        std::vector<std::string> out;
        for (auto n : feature_names()) out.emplace_back(n);
        return out;
    });
    m.def("feature_schema_hash", &feature_schema_hash);
    m.def("feature_vector", [](const std::string& params_json) {
        const auto v = to_feature_vector(params_from_json(json::parse(params_json)));
        return std::vector<double>(v.begin(), v.end());
    });
    m.def("weight_from_geometry", [](const std::string& params_json) {
        return physics::weight_from_geometry(params_from_json(json::parse(params_json)));
    });
    m.def("physics_residuals", &physics_residuals, py::arg("params_json"), py::arg("weight_g"), py::arg("arch"));

    m.def("synthesize_csv", [](std::uint64_t seed, std::size_t n) { return dataset_to_csv(data::synthesize(seed, n)); },
          py::arg("seed"), py::arg("n"));
    m.def(
        "augment_csv",
        [](const std::string& csv, std::size_t count, std::uint64_t seed, double variation, double noise) {
            data::AugmentConfig cfg;
            cfg.target_count = count;
            cfg.seed = seed;
            cfg.variation_fraction = variation;
            cfg.noise_sigma_fraction = noise;
            return dataset_to_csv(data::augment(dataset_from_csv(csv), cfg));
        },
        py::arg("csv"), py::arg("count"), py::arg("seed"), py::arg("variation") = 0.10, py::arg("noise") = 0.01);

    m.def(
        "compute_metrics",
        [](const std::vector<double>& truth, const std::vector<double>& pred) {
            return eval::to_json(eval::compute_metrics(truth, pred)).dump();
        },
        py::arg("truth"), py::arg("pred"));

    py::class_<Model>(m, "Model")
        .def_property_readonly("arch", &Model::arch)
        .def_property_readonly("parameter_count", [](const Model& mm) { return mm.model->parameter_count(); })
        .def_property_readonly("metrics_json", [](const Model& mm) { return mm.metrics.dump(); })
        .def("predict", &Model::predict, py::arg("params_json"))
        .def("predict_features", &Model::predict_features, py::arg("rows"))
        .def("save", &Model::save, py::arg("path"));
    m.def("load_model", &load_model, py::arg("path"));
    m.def("train", &train, py::arg("csv"), py::arg("arch"), py::arg("seed") = 42, py::arg("test_fraction") = 0.2,
          py::arg("epochs") = py::none(), py::arg("lambda_physics") = py::none());

    m.def("segment_angle", &vision::segment_angle, py::arg("m1"), py::arg("m2"));
    m.def("extract", &extract, py::arg("image"), py::arg("scale_factor"));
    m.def("render_truss", &render_truss, py::arg("nodes_mm"), py::arg("members"), py::arg("scale_mm_per_px") = 0.5,
          py::arg("line_width_px") = 4.0);
}
