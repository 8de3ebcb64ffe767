#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "pinnbridge/error.hpp"
#include "pinnbridge/models.hpp"

using namespace pinnbridge;
using namespace pinnbridge::models;
using ad::Tensor;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::ContractError;
}

Tensor batch(std::size_t rows, double base = 0.1) {
    Tensor x = Tensor::zeros(rows, kFeatureCount);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = base * static_cast<double>(i % 7) - 0.3;
    return x;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("pinnbridge-unit-" + name);
}

std::size_t dense_params(std::size_t in, std::size_t out) { return in * out + out; }

}  // namespace

TEST_SUITE("models") {

TEST_CASE("polynomial expansion ordering") {
    const std::vector<double> ab{2.0, 3.0};
    CHECK(polynomial_expand(ab, 3) == std::vector<double>{2, 3, 4, 9, 6, 8, 27});
    const std::vector<double> x{5.0};
    CHECK(polynomial_expand(x, 2) == std::vector<double>{5, 25});
    CHECK(polynomial_dimension(8, 3) == 52);
    CHECK(polynomial_dimension(2, 3) == 7);
    std::vector<double> eight(8, 1.0);
    CHECK(polynomial_expand(eight, 3).size() == 52);
    CHECK(kind_of([&] { polynomial_expand(eight, 4); }) == ErrorKind::Unsupported);
}

TEST_CASE("batch polynomial expansion matches the row version") {
    const Tensor x = batch(3);
    const Tensor e = polynomial_expand(x, 3);
    REQUIRE(e.rows() == 3);
    REQUIRE(e.cols() == 52);
    for (std::size_t r = 0; r < 3; ++r) {
        std::vector<double> row(x.values().begin() + r * 8, x.values().begin() + (r + 1) * 8);
        const auto want = polynomial_expand(row, 3);
        for (std::size_t c = 0; c < 52; ++c) CHECK(e(r, c) == want[c]);
    }
}

TEST_CASE("architecture tags") {
    CHECK(arch_tag(Arch::Pinn) == "pinn");
    CHECK(arch_tag(Arch::Pikan) == "pikan");
    CHECK(parse_arch("pikan") == Arch::Pikan);
    CHECK(kind_of([] { parse_arch("mlp"); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("parameter counts follow the layer sizes") {
    const PinnModel pinn;
    const std::size_t pinn_expected = dense_params(8, 64) + 2 * 64 + dense_params(64, 128) + 2 * 128 +
                                      dense_params(128, 64) + 2 * 64 + dense_params(64, 1);
    CHECK(pinn.parameter_count() == pinn_expected);

    const PikanModel pikan;
    const std::size_t branch = dense_params(52, 32) + 2 * 32 + dense_params(32, 16) + 2 * 16 + dense_params(16, 1);
    const std::size_t pikan_expected = 8 * branch + dense_params(8, 64) + dense_params(64, 32) + dense_params(32, 1);
    CHECK(pikan.parameter_count() == pikan_expected);
}

TEST_CASE("inference is deterministic") {
    for (auto arch : {Arch::Pinn, Arch::Pikan}) {
        const auto m = make_model(arch, 3);
        const Tensor x = batch(4);
        CHECK(m->predict_standardized(x) == m->predict_standardized(x));
        CHECK(m->predict_standardized(x).size() == 4);
    }
}

TEST_CASE("same seed gives the same initial weights") {
    auto a = make_model(Arch::Pikan, 5);
    auto b = make_model(Arch::Pikan, 5);
    auto c = make_model(Arch::Pikan, 6);
    const auto pa = a->parameters();
    const auto pb = b->parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);
    CHECK(*pa[0] != *c->parameters()[0]);
}

TEST_CASE("zero weights predict zero") {
    for (auto arch : {Arch::Pinn, Arch::Pikan}) {
        auto m = make_model(arch, 1);
        for (auto* p : m->parameters())
            for (auto& v : p->values()) v = 0.0;
        for (double y : m->predict_standardized(batch(3))) CHECK(y == 0.0);
    }
}

TEST_CASE("zeroed branches leave only the aggregator bias path") {
    PikanModel m({}, 2);
    for (auto& br : m.branches()) {
        for (auto& d : br.hidden)
            for (auto* t : {&d.weight, &d.bias})
                for (auto& v : t->values()) v = 0.0;
        for (auto& v : br.output.weight.values()) v = 0.0;
        for (auto& v : br.output.bias.values()) v = 0.0;
    }
    m.target = {10.0, 2.0};
    // Hand propagation of a zero vector: h1 = relu(b1), h2 = relu(h1 W2 + b2), y = h2 Wo + bo.
    const auto& agg = m.aggregator();
    std::vector<double> h(agg[0].bias.values().begin(), agg[0].bias.values().end());
    for (auto& v : h) v = std::max(0.0, v);
    for (std::size_t layer = 1; layer < agg.size(); ++layer) {
        std::vector<double> next(agg[layer].bias.cols());
        for (std::size_t j = 0; j < next.size(); ++j) {
            double s = agg[layer].bias[j];
            for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * agg[layer].weight(i, j);
            next[j] = std::max(0.0, s);
        }
        h = next;
    }
    double y = m.output().bias[0];
    for (std::size_t i = 0; i < h.size(); ++i) y += h[i] * m.output().weight(i, 0);
    const double want = 10.0 + 2.0 * y;
    for (double p : m.predict_standardized(batch(3))) CHECK(p == doctest::Approx(want).epsilon(1e-12));
    const auto bo = m.branch_outputs(batch(2));
    for (double v : bo.values()) CHECK(v == 0.0);
}

TEST_CASE("train mode needs two samples and an rng") {
    auto m = make_model(Arch::Pinn, 1);
    ad::Tape tape;
    const auto vars = m->bind(tape);
    Rng rng(1);
    ForwardContext ctx{Mode::Train, &rng, nullptr};
    CHECK(kind_of([&] { m->forward(tape, vars, batch(1), ctx); }) == ErrorKind::ContractError);
    ForwardContext no_rng{Mode::Train, nullptr, nullptr};
    CHECK(kind_of([&] { m->forward(tape, vars, batch(4), no_rng); }) == ErrorKind::ContractError);
    ForwardContext infer{};
    CHECK(kind_of([&] { m->forward(tape, vars, Tensor::zeros(2, 5), infer); }) == ErrorKind::ShapeError);
}

TEST_CASE("train mode reports one moment set per batch norm") {
    for (auto arch : {Arch::Pinn, Arch::Pikan}) {
        auto m = make_model(arch, 1);
        ad::Tape tape;
        const auto vars = m->bind(tape);
        Rng rng(2);
        std::vector<ad::BatchMoments> moments;
        ForwardContext ctx{Mode::Train, &rng, &moments};
        m->forward(tape, vars, batch(5), ctx);
        CHECK(moments.size() == m->batch_norm_count());
        m->apply_batch_moments(moments);
        moments.pop_back();
        CHECK(kind_of([&] { m->apply_batch_moments(moments); }) == ErrorKind::ContractError);
    }
}

TEST_CASE("dropout mask") {
    Rng rng(11);
    const Tensor mask = dropout_mask(100, 100, 0.3, rng);
    std::size_t zeros = 0;
    for (double v : mask.values()) {
        if (v == 0.0) ++zeros;
        else CHECK(v == doctest::Approx(1.0 / 0.7).epsilon(1e-15));
    }
    CHECK(zeros > 2700);
    CHECK(zeros < 3300);
    CHECK(kind_of([&] { dropout_mask(1, 1, 1.0, rng); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("branch response shape") {
    const PikanModel m({}, 4);
    FeatureVector base{};
    std::vector<double> sweep(50);
    for (std::size_t i = 0; i < sweep.size(); ++i) sweep[i] = -2.0 + 0.08 * static_cast<double>(i);
    const Tensor t = branch_response(m, 2, sweep, base);
    CHECK(t.rows() == 50);
    CHECK(t.cols() == 8);

    const std::vector<double> constant(5, 0.7);
    const Tensor c = branch_response(m, 2, constant, base);
    for (std::size_t r = 1; r < 5; ++r)
        for (std::size_t k = 0; k < 8; ++k) CHECK(c(r, k) == c(0, k));
    CHECK(kind_of([&] { branch_response(m, 8, sweep, base); }) == ErrorKind::ContractError);
}

TEST_CASE("model files round-trip exactly") {
    for (auto arch : {Arch::Pinn, Arch::Pikan}) {
        auto m = make_model(arch, 9);
        m->target = {12.5, 3.0};
        m->stats.mean = {1, 2, 3, 4, 5, 6, 7, 8};
        m->stats.std = {1, 1, 2, 2, 3, 3, 4, 4};
        m->trained = true;
        const auto path = temp_file(std::string(arch_tag(arch)) + ".json");
        const nlohmann::json metrics = {{"mae", 1.25}, {"r2", 0.97}};
        save(*m, path, metrics);
        const auto back = load(path, arch);
        CHECK(back.model->arch() == arch);
        CHECK(back.metrics == metrics);
        const std::vector<FeatureVector> raw{to_feature_vector(fixtures::default_bridge())};
        CHECK(back.model->predict(raw) == m->predict(raw));

        // Re-saving the loaded model reproduces the same bytes.
        const auto again = temp_file(std::string(arch_tag(arch)) + "-again.json");
        save(*back.model, again, back.metrics);
        std::ifstream a(path), b(again);
        const std::string sa{std::istreambuf_iterator<char>(a), {}}, sb{std::istreambuf_iterator<char>(b), {}};
        CHECK(sa == sb);
        std::filesystem::remove(path);
        std::filesystem::remove(again);
    }
}

TEST_CASE("model file format errors") {
    auto m = make_model(Arch::Pinn, 1);
    const auto good = to_json(*m);

    CHECK(kind_of([&] { from_json(good, Arch::Pikan); }) == ErrorKind::FormatError);

    auto bad = good;
    bad["format"] = "something-else";
    CHECK(kind_of([&] { from_json(bad); }) == ErrorKind::FormatError);

    bad = good;
    bad["version"] = kModelFormatVersion + 1;
    CHECK(kind_of([&] { from_json(bad); }) == ErrorKind::FormatError);

    bad = good;
    bad["schema"]["hash"] = "0000";
    CHECK(kind_of([&] { from_json(bad); }) == ErrorKind::FormatError);

    const auto path = temp_file("truncated.json");
    {
        std::ofstream out(path);
        const auto text = good.dump();
        out << text.substr(0, text.size() / 2);
    }
    CHECK(kind_of([&] { load(path); }) == ErrorKind::FormatError);
    std::filesystem::remove(path);
    CHECK(kind_of([] { load("/nonexistent/model.json"); }) == ErrorKind::IoError);
}

}
