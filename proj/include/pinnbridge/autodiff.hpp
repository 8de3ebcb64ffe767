#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pinnbridge/tensor.hpp"

namespace pinnbridge::ad {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Records forward operations in topological order; backward() walks them in
// reverse and accumulates gradients into every node that requires one.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var variable(Tensor value);

    // Append an op node. parents are node ids; fn runs during backward.
    Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn);

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    const Tensor& value(Var v) const { return value(v.id()); }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

    // Gradient of the last backward() loss w.r.t. v (zeros if v did not influence it).
    Tensor grad(Var v) const;
    const Tensor& grad_ref(std::size_t id) const { return nodes_.at(id).grad; }

    // Called from BackwardFn closures.
    void accumulate(std::size_t id, const Tensor& g);

    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::vector<std::size_t> parents;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
    bool consumed_ = false;
};

// Forward ops. Each appends exactly one tape record.
Var matmul(Var a, Var b);
Var add(Var a, Var b);              // same shape
Var add_row(Var x, Var row);        // x (n x m) + row (1 x m), broadcast over rows
Var sub(Var a, Var b);
Var mul(Var a, Var b);              // elementwise
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
Var relu(Var x);
Var tanh(Var x);
Var power(Var x, int k);
Var square(Var x);
Var abs(Var x);
Var hinge(Var x);                   // max(0, x); subgradient 0 at the kink
Var concat_cols(std::span<const Var> parts);
Var mean(Var x);                    // mean of all elements -> 1x1
Var sum(Var x);

struct BatchMoments {
    Tensor mean;      // 1 x m
    Tensor variance;  // 1 x m, population
};

// Train-mode batch normalization: normalizes each column with the batch
// moments, then applies gamma/beta. The moments are reported through `moments`.
Var batch_norm(Var x, Var gamma, Var beta, double eps, BatchMoments* moments = nullptr);

// Inference-mode batch normalization against fixed running moments.
Var batch_norm_fixed(Var x, Var gamma, Var beta, const Tensor& running_mean,
                     const Tensor& running_var, double eps);

// Adam with bias correction. One state slot per parameter, created on first step.
class Adam {
public:
    explicit Adam(double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

    // Throws NumericalError on a non-finite gradient, leaving params untouched.
    void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

    long steps() const { return t_; }
    double learning_rate() const { return lr_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

// Global L2 norm clipping; returns the pre-clip norm.
double clip_grad_norm(std::span<Tensor> grads, double max_norm);

struct GradCheckOptions {
    double h = 1e-5;
    double abs_floor = 1e-3;
    // Coordinates to probe; empty means all.
    std::vector<std::size_t> indices;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
};

// Compares `analytic` to central differences (f(t+h e_i) - f(t-h e_i)) / 2h.
// Error per coordinate: |a - n| / max(abs_floor, |a|, |n|).
GradCheckResult finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> theta,
                                        std::span<const double> analytic,
                                        const GradCheckOptions& options = {});

}  // namespace pinnbridge::ad
