#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "pinnbridge/autodiff.hpp"
#include "pinnbridge/error.hpp"
#include "pinnbridge/rng.hpp"

using namespace pinnbridge;
using namespace pinnbridge::ad;

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

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Tensor t = Tensor::zeros(r, c);
    for (auto& v : t.values()) v = uniform(rng, -1.0, 1.0);
    return t;
}

// Value and gradient of f(theta) built on a fresh tape.
template <typename Build>
std::pair<double, std::vector<double>> eval_with_grad(Build build, const Tensor& theta) {
    Tape tape;
    Var p = tape.variable(theta);
    Var loss = build(p);
    tape.backward(loss);
    const auto g = tape.grad(p);
    return {loss.value().item(), {g.values().begin(), g.values().end()}};
}

template <typename Build>
double check_gradient(Build build, const Tensor& theta, double h = 1e-5) {
    const auto [value, analytic] = eval_with_grad(build, theta);
    auto f = [&](std::span<const double> x) {
        Tensor t(theta.shape(), std::vector<double>(x.begin(), x.end()));
        Tape tape;
        return build(tape.constant(t)).value().item();
    };
    GradCheckOptions opt;
    opt.h = h;
    return finite_difference_check(f, theta.values(), analytic, opt).max_rel_error;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("relu and mean of squares") {
    Tape tape;
    Var x = tape.constant(Tensor::row({-1.0, 0.0, 2.0}));
    CHECK(relu(x).value().data() == std::vector<double>{0.0, 0.0, 2.0});
    Var y = tape.constant(Tensor::row({3.0, -3.0}));
    CHECK(mean(square(y)).value().item() == 9.0);
}

TEST_CASE("hand derivative of mean(square(w x))") {
    Tape tape;
    Var w = tape.variable(Tensor::scalar(2.0));
    Var x = tape.constant(Tensor::scalar(1.0));
    Var loss = mean(square(mul(w, x)));
    tape.backward(loss);
    CHECK(tape.grad(w).item() == 4.0);
}

TEST_CASE("constant loss gives zero gradients") {
    Tape tape;
    Var w = tape.variable(Tensor::row({1.0, 2.0}));
    Var c = tape.constant(Tensor::scalar(5.0));
    tape.backward(mean(c));
    const Tensor g = tape.grad(w);
    for (double v : g.values()) CHECK(v == 0.0);
}

TEST_CASE("backward contract") {
    Tape tape;
    Var w = tape.variable(Tensor::row({1.0, 2.0}));
    CHECK(kind_of([&] { tape.backward(w); }) == ErrorKind::ContractError);

    Tape t2;
    Var v = t2.variable(Tensor::scalar(1.0));
    t2.backward(square(v));
    CHECK(kind_of([&] { t2.backward(square(v)); }) == ErrorKind::ContractError);
}

TEST_CASE("shape errors") {
    Tape tape;
    Var a = tape.constant(Tensor::zeros(2, 3));
    Var b = tape.constant(Tensor::zeros(2, 3));
    CHECK(kind_of([&] { matmul(a, b); }) == ErrorKind::ShapeError);
    CHECK(kind_of([&] { add(a, tape.constant(Tensor::zeros(3, 2))); }) == ErrorKind::ShapeError);
    CHECK(kind_of([&] { add_row(a, tape.constant(Tensor::zeros(1, 2))); }) == ErrorKind::ShapeError);
}

TEST_CASE("quadratic gradient check is essentially exact") {
    Rng rng = derive_rng(1, 1);
    const Tensor theta = random_matrix(1, 6, rng);
    const auto build = [](Var p) { return sum(add_scalar(scale(square(p), 3.0), 1.0)); };
    CHECK(check_gradient(build, theta) < 1e-10);
}

TEST_CASE("two-layer tanh network passes the gradient check") {
    Rng rng = derive_rng(2, 2);
    const Tensor x = random_matrix(5, 3, rng);
    const Tensor w1 = random_matrix(3, 4, rng);
    const Tensor w2 = random_matrix(4, 1, rng);
    const Tensor y = random_matrix(5, 1, rng);
    // Differentiate with respect to w1.
    const auto build = [&](Var p) {
        auto& t = p.tape();
        Var h = tanh(matmul(t.constant(x), p));
        Var out = matmul(h, t.constant(w2));
        return mean(square(sub(out, t.constant(y))));
    };
    CHECK(check_gradient(build, w1, 1e-3) < 1e-4);
}

TEST_CASE("hinge away from the kink") {
    const Tensor theta = Tensor::row({-2.0, -0.5, 0.7, 1.5});
    const auto build = [](Var p) { return mean(square(hinge(add_scalar(p, -0.1)))); };
    CHECK(check_gradient(build, theta) < 1e-5);
}

TEST_CASE("every op passes a gradient check") {
    Rng rng = derive_rng(4, 4);
    const Tensor theta = random_matrix(3, 4, rng);
    const Tensor other = random_matrix(3, 4, rng);
    const Tensor row = random_matrix(1, 4, rng);
    const Tensor mix = random_matrix(3, 8, rng);
    const auto c = [](Var p, const Tensor& t) { return p.tape().constant(t); };

    CHECK(check_gradient([&](Var p) { return sum(mul(p, c(p, other))); }, theta) < 1e-8);
    CHECK(check_gradient([&](Var p) { return sum(square(add_row(p, c(p, row)))); }, theta) < 1e-8);
    CHECK(check_gradient([&](Var p) { return mean(power(p, 3)); }, theta) < 1e-8);
    CHECK(check_gradient([&](Var p) { return mean(abs(p)); }, theta) < 1e-8);
    CHECK(check_gradient([&](Var p) { return mean(relu(p)); }, theta) < 1e-8);
    CHECK(check_gradient([&](Var p) { return sum(tanh(sub(p, c(p, other)))); }, theta) < 1e-8);
    CHECK(check_gradient(
              [&](Var p) {
                  const Var parts[] = {p, square(p)};
                  return sum(mul(concat_cols(parts), c(p, mix)));
              },
              theta) < 1e-8);
}

TEST_CASE("batch norm gradient") {
    Rng rng = derive_rng(5, 5);
    const Tensor x = random_matrix(6, 3, rng);
    const Tensor gamma = random_matrix(1, 3, rng);
    const Tensor beta = random_matrix(1, 3, rng);
    const Tensor w = random_matrix(6, 3, rng);
    const auto build = [&](Var p) {
        auto& t = p.tape();
        return sum(mul(batch_norm(p, t.constant(gamma), t.constant(beta), 1e-5), t.constant(w)));
    };
    CHECK(check_gradient(build, x) < 1e-6);

    Tape tape;
    BatchMoments m;
    Var out = batch_norm(tape.constant(x), tape.constant(Tensor({1, 3}, 1.0)), tape.constant(Tensor::zeros(1, 3)),
                         1e-5, &m);
    for (std::size_t j = 0; j < 3; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < 6; ++i) s += out.value()(i, j);
        CHECK(std::abs(s) < 1e-12);
    }
    CHECK(m.mean.cols() == 3);
    CHECK(kind_of([&] {
              batch_norm(tape.constant(Tensor::zeros(1, 3)), tape.constant(gamma), tape.constant(beta), 1e-5);
          }) == ErrorKind::ContractError);
}

TEST_CASE("adam leaves parameters alone on zero gradients") {
    Tensor p = Tensor::row({1.0, -2.0, 3.0});
    const Tensor before = p;
    Adam opt;
    Tensor* params[] = {&p};
    const Tensor grads[] = {Tensor::zeros(1, 3)};
    opt.step(params, grads);
    CHECK(p == before);
}

TEST_CASE("adam first step moves by the learning rate") {
    Tensor p = Tensor::row({1.0, -2.0});
    Adam opt(0.01);
    Tensor* params[] = {&p};
    const Tensor grads[] = {Tensor::row({0.5, -4.0})};
    opt.step(params, grads);
    // Bias-corrected m/sqrt(v) is sign(g) on the first step.
    CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-9));
    CHECK(opt.steps() == 1);
}

TEST_CASE("adam is deterministic") {
    auto run = [] {
        Tensor p = Tensor::row({0.3, 0.1});
        Adam opt;
        Tensor* params[] = {&p};
        for (int i = 0; i < 5; ++i) {
            const Tensor grads[] = {Tensor::row({p[0] * 2.0, p[1] - 1.0})};
            opt.step(params, grads);
        }
        return p;
    };
    CHECK(run() == run());
}

TEST_CASE("adam rejects non-finite gradients") {
    Tensor p = Tensor::row({1.0});
    const Tensor before = p;
    Adam opt;
    Tensor* params[] = {&p};
    const Tensor grads[] = {Tensor::row({std::numeric_limits<double>::quiet_NaN()})};
    CHECK(kind_of([&] { opt.step(params, grads); }) == ErrorKind::NumericalError);
    CHECK(p == before);
}

TEST_CASE("gradient norm clipping") {
    std::vector<Tensor> g{Tensor::row({3.0}), Tensor::row({4.0})};
    CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(g[0][0] == doctest::Approx(0.6));
    CHECK(g[1][0] == doctest::Approx(0.8));
    std::vector<Tensor> small{Tensor::row({0.1})};
    clip_grad_norm(small, 1.0);
    CHECK(small[0][0] == 0.1);
}

TEST_CASE("finite difference check reports the floor-scaled error") {
    const std::vector<double> theta{1.0};
    const std::vector<double> wrong{3.0};
    const auto r = finite_difference_check([](std::span<const double> x) { return x[0] * x[0]; }, theta, wrong);
    CHECK(r.max_rel_error == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(r.checked == 1);
}

}
