#include "pinnbridge/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pinnbridge/error.hpp"

namespace pinnbridge::ad {

// ---- Tensor ----------------------------------------------------------------

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != product(shape_))
        fail(ErrorKind::ShapeError, "value count " + std::to_string(values_.size()) +
                                        " does not match shape " + shape_string());
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::column(std::vector<double> values) {
    const auto n = values.size();
    return Tensor({n, 1}, std::move(values));
}

Tensor Tensor::row(std::vector<double> values) {
    const auto n = values.size();
    return Tensor({1, n}, std::move(values));
}

double Tensor::item() const {
    if (values_.size() != 1) fail(ErrorKind::ShapeError, "item() on non-scalar " + shape_string());
    return values_[0];
}

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ')';
    return os.str();
}

// ---- Tape ------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, false, {}, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, true, {}, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn) {
    if (consumed_) fail(ErrorKind::ContractError, "tape already consumed by backward()");
    bool needs = false;
    for (auto p : parents) needs = needs || nodes_.at(p).requires_grad;
    nodes_.push_back(Node{std::move(value), {}, needs, std::move(parents),
                          needs ? std::move(fn) : BackwardFn{}});
    return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(Var v) const {
    const auto& node = nodes_.at(v.id());
    if (node.grad.size() == 0) return Tensor(node.value.shape(), 0.0);
    return node.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
    auto& node = nodes_.at(id);
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
        node.grad = g;
        return;
    }
    auto dst = node.grad.values();
    auto src = g.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
    if (consumed_) fail(ErrorKind::ContractError, "backward() called twice on one tape");
    const auto& lv = value(loss);
    if (lv.size() != 1) fail(ErrorKind::ContractError, "backward() needs a scalar loss, got " + lv.shape_string());
    consumed_ = true;
    for (auto& n : nodes_) n.grad = Tensor();
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad = Tensor(lv.shape(), 1.0);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        auto& node = nodes_[i];
        if (!node.backward || node.grad.size() == 0) continue;
        node.backward(*this, i);
    }
}

// ---- ops -------------------------------------------------------------------

namespace {

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) fail(ErrorKind::ShapeError, std::string(op) + ": expected rank-2 tensor, got " + t.shape_string());
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        fail(ErrorKind::ShapeError, std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

Tape& same_tape(Var a, Var b) {
    if (&a.tape() != &b.tape()) fail(ErrorKind::ContractError, "operands recorded on different tapes");
    return a.tape();
}

// Elementwise unary op with derivative d(x, y).
template <typename F, typename D>
Var unary(Var x, F f, D d) {
    Tape& tape = x.tape();
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    const auto xid = x.id();
    return tape.record(std::move(out), {xid}, [xid, d](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_ref(self);
        const Tensor& xv = t.value(xid);
        const Tensor& yv = t.value(self);
        Tensor gx(xv.shape());
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] = g[i] * d(xv[i], yv[i]);
        t.accumulate(xid, gx);
    });
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& tape = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_rank2(av, "matmul");
    require_rank2(bv, "matmul");
    if (av.cols() != bv.rows())
        fail(ErrorKind::ShapeError, "matmul: " + av.shape_string() + " x " + bv.shape_string());
    const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
    Tensor out = Tensor::zeros(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av(i, p);
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) out(i, j) += aip * bv(p, j);
        }
    const auto aid = a.id(), bid = b.id();
    return tape.record(std::move(out), {aid, bid}, [aid, bid, n, k, m](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_ref(self);
        const Tensor& av = t.value(aid);
        const Tensor& bv = t.value(bid);
        if (t.requires_grad(aid)) {
            Tensor ga = Tensor::zeros(n, k);  // g * b^T
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) s += g(i, j) * bv(p, j);
                    ga(i, p) = s;
                }
            t.accumulate(aid, ga);
        }
        if (t.requires_grad(bid)) {
            Tensor gb = Tensor::zeros(k, m);  // a^T * g
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = av(i, p);
                    if (aip == 0.0) continue;
                    for (std::size_t j = 0; j < m; ++j) gb(p, j) += aip * g(i, j);
                }
            t.accumulate(bid, gb);
        }
    });
}

Var add(Var a, Var b) {
    Tape& tape = same_tape(a, b);
    require_same(a.value(), b.value(), "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    const auto aid = a.id(), bid = b.id();
    return tape.record(std::move(out), {aid, bid}, [aid, bid](Tape& t, std::size_t self) {
        t.accumulate(aid, t.grad_ref(self));
        t.accumulate(bid, t.grad_ref(self));
    });
}

Var add_row(Var x, Var row) {
    Tape& tape = same_tape(x, row);
    const Tensor& xv = x.value();
    const Tensor& rv = row.value();
    require_rank2(xv, "add_row");
    if (rv.rank() != 2 || rv.rows() != 1 || rv.cols() != xv.cols())
        fail(ErrorKind::ShapeError, "add_row: " + xv.shape_string() + " + " + rv.shape_string());
    Tensor out = xv;
    for (std::size_t i = 0; i < xv.rows(); ++i)
        for (std::size_t j = 0; j < xv.cols(); ++j) out(i, j) += rv[j];
    const auto xid = x.id(), rid = row.id();
    return tape.record(std::move(out), {xid, rid}, [xid, rid](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_ref(self);
        t.accumulate(xid, g);
        if (t.requires_grad(rid)) {
            Tensor gr = Tensor::zeros(1, g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
            t.accumulate(rid, gr);
        }
    });
}

Var sub(Var a, Var b) {
    Tape& tape = same_tape(a, b);
    require_same(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    const auto aid = a.id(), bid = b.id();
    return tape.record(std::move(out), {aid, bid}, [aid, bid](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_ref(self);
        t.accumulate(aid, g);
        if (t.requires_grad(bid)) {
            Tensor gb = g;
            for (auto& v : gb.values()) v = -v;
            t.accumulate(bid, gb);
        }
    });
}

Var mul(Var a, Var b) {
    Tape& tape = same_tape(a, b);
    require_same(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    const auto aid = a.id(), bid = b.id();
    return tape.record(std::move(out), {aid, bid}, [aid, bid](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_ref(self);
        if (t.requires_grad(aid)) {
            Tensor ga = g;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= t.value(bid)[i];
            t.accumulate(aid, ga);
        }
        if (t.requires_grad(bid)) {
            Tensor gb = g;
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= t.value(aid)[i];
            t.accumulate(bid, gb);
        }
    });
}

Var scale(Var x, double c) {
    return unary(x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(Var x, double c) {
    return unary(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var relu(Var x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
    return unary(x, [](double v) { return std::tanh(v); },
                 [](double, double y) { return 1.0 - y * y; });
}

Var power(Var x, int k) {
    if (k < 0) fail(ErrorKind::Unsupported, "power: negative exponent");
    return unary(x, [k](double v) { return std::pow(v, k); },
                 [k](double v, double) { return k == 0 ? 0.0 : k * std::pow(v, k - 1); });
}

Var square(Var x) {
    return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var abs(Var x) {
    return unary(x, [](double v) { return std::abs(v); },
                 [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var hinge(Var x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) fail(ErrorKind::ShapeError, "concat_cols: no inputs");
    Tape& tape = parts[0].tape();
    const std::size_t n = parts[0].value().rows();
    std::vector<std::size_t> ids, widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        same_tape(parts[0], p);
        require_rank2(p.value(), "concat_cols");
        if (p.value().rows() != n) fail(ErrorKind::ShapeError, "concat_cols: row count mismatch");
        ids.push_back(p.id());
        widths.push_back(p.value().cols());
        total += p.value().cols();
    }
    Tensor out = Tensor::zeros(n, total);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const Tensor& v = p.value();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < v.cols(); ++j) out(i, off + j) = v(i, j);
        off += v.cols();
    }
    auto parents = ids;
    return tape.record(std::move(out), std::move(parents), [ids, widths, n](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_ref(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (t.requires_grad(ids[k])) {
                Tensor gk = Tensor::zeros(n, widths[k]);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < widths[k]; ++j) gk(i, j) = g(i, off + j);
                t.accumulate(ids[k], gk);
            }
            off += widths[k];
        }
    });
}

Var sum(Var x) {
    Tape& tape = x.tape();
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    const auto xid = x.id();
    return tape.record(Tensor::scalar(s), {xid}, [xid](Tape& t, std::size_t self) {
        t.accumulate(xid, Tensor(t.value(xid).shape(), t.grad_ref(self).item()));
    });
}

Var mean(Var x) {
    Tape& tape = x.tape();
    const auto n = x.value().size();
    if (n == 0) fail(ErrorKind::ShapeError, "mean of empty tensor");
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    const auto xid = x.id();
    return tape.record(Tensor::scalar(s / static_cast<double>(n)), {xid}, [xid, n](Tape& t, std::size_t self) {
        t.accumulate(xid, Tensor(t.value(xid).shape(), t.grad_ref(self).item() / static_cast<double>(n)));
    });
}

Var batch_norm(Var x, Var gamma, Var beta, double eps, BatchMoments* moments) {
    Tape& tape = same_tape(x, gamma);
    same_tape(x, beta);
    const Tensor& xv = x.value();
    require_rank2(xv, "batch_norm");
    const std::size_t n = xv.rows(), m = xv.cols();
    if (n < 2) fail(ErrorKind::ContractError, "batch_norm in train mode needs a batch of at least 2");
    if (gamma.value().size() != m || beta.value().size() != m)
        fail(ErrorKind::ShapeError, "batch_norm: gamma/beta width mismatch");

    Tensor mu = Tensor::zeros(1, m), var = Tensor::zeros(1, m);
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += xv(i, j);
        mu[j] = s / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (xv(i, j) - mu[j]) * (xv(i, j) - mu[j]);
        var[j] = ss / static_cast<double>(n);
    }
    Tensor inv_std = Tensor::zeros(1, m);
    for (std::size_t j = 0; j < m; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
    Tensor xhat = Tensor::zeros(n, m), out = Tensor::zeros(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            xhat(i, j) = (xv(i, j) - mu[j]) * inv_std[j];
            out(i, j) = gamma.value()[j] * xhat(i, j) + beta.value()[j];
        }
    if (moments) *moments = BatchMoments{mu, var};

    const auto xid = x.id(), gid = gamma.id(), bid = beta.id();
    return tape.record(std::move(out), {xid, gid, bid},
                       [xid, gid, bid, xhat = std::move(xhat), inv_std, n, m](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_ref(self);
        const Tensor& gam = t.value(gid);
        Tensor ggamma = Tensor::zeros(1, m), gbeta = Tensor::zeros(1, m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                gbeta[j] += g(i, j);
                ggamma[j] += g(i, j) * xhat(i, j);
            }
        t.accumulate(gid, ggamma);
        t.accumulate(bid, gbeta);
        if (t.requires_grad(xid)) {
            const double nn = static_cast<double>(n);
            Tensor gx = Tensor::zeros(n, m);
            for (std::size_t j = 0; j < m; ++j) {
                double s1 = 0.0, s2 = 0.0;  // sum dxhat, sum dxhat*xhat
                for (std::size_t i = 0; i < n; ++i) {
                    const double dxh = g(i, j) * gam[j];
                    s1 += dxh;
                    s2 += dxh * xhat(i, j);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double dxh = g(i, j) * gam[j];
                    gx(i, j) = inv_std[j] / nn * (nn * dxh - s1 - xhat(i, j) * s2);
                }
            }
            t.accumulate(xid, gx);
        }
    });
}

Var batch_norm_fixed(Var x, Var gamma, Var beta, const Tensor& running_mean,
                     const Tensor& running_var, double eps) {
    Tape& tape = same_tape(x, gamma);
    same_tape(x, beta);
    const Tensor& xv = x.value();
    require_rank2(xv, "batch_norm_fixed");
    const std::size_t n = xv.rows(), m = xv.cols();
    if (gamma.value().size() != m || beta.value().size() != m || running_mean.size() != m ||
        running_var.size() != m)
        fail(ErrorKind::ShapeError, "batch_norm_fixed: parameter width mismatch");
    Tensor inv_std = Tensor::zeros(1, m);
    for (std::size_t j = 0; j < m; ++j) inv_std[j] = 1.0 / std::sqrt(running_var[j] + eps);
    Tensor xhat = Tensor::zeros(n, m), out = Tensor::zeros(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            xhat(i, j) = (xv(i, j) - running_mean[j]) * inv_std[j];
            out(i, j) = gamma.value()[j] * xhat(i, j) + beta.value()[j];
        }
    const auto xid = x.id(), gid = gamma.id(), bid = beta.id();
    return tape.record(std::move(out), {xid, gid, bid},
                       [xid, gid, bid, xhat = std::move(xhat), inv_std, n, m](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_ref(self);
        const Tensor& gam = t.value(gid);
        Tensor ggamma = Tensor::zeros(1, m), gbeta = Tensor::zeros(1, m), gx = Tensor::zeros(n, m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                gbeta[j] += g(i, j);
                ggamma[j] += g(i, j) * xhat(i, j);
                gx(i, j) = g(i, j) * gam[j] * inv_std[j];
            }
        t.accumulate(gid, ggamma);
        t.accumulate(bid, gbeta);
        t.accumulate(xid, gx);
    });
}

// ---- Adam ------------------------------------------------------------------

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
    if (params.size() != grads.size()) fail(ErrorKind::ShapeError, "adam: parameter/gradient count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k]->same_shape(grads[k]))
            fail(ErrorKind::ShapeError, "adam: gradient shape mismatch at slot " + std::to_string(k));
        if (!grads[k].all_finite())
            fail(ErrorKind::NumericalError, "adam: non-finite gradient at slot " + std::to_string(k));
    }
    if (m_.empty()) {
        for (auto* p : params) {
            m_.emplace_back(p->shape(), 0.0);
            v_.emplace_back(p->shape(), 0.0);
        }
    } else if (m_.size() != params.size()) {
        fail(ErrorKind::ShapeError, "adam: parameter set changed between steps");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k]->values();
        auto g = grads[k].values();
        auto m = m_[k].values();
        auto v = v_[k].values();
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

double clip_grad_norm(std::span<Tensor> grads, double max_norm) {
    double ss = 0.0;
    for (const auto& g : grads)
        for (double v : g.values()) ss += v * v;
    const double norm = std::sqrt(ss);
    if (max_norm > 0.0 && norm > max_norm) {
        const double c = max_norm / norm;
        for (auto& g : grads)
            for (auto& v : g.values()) v *= c;
    }
    return norm;
}

// ---- gradient check --------------------------------------------------------

GradCheckResult finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> theta,
                                        std::span<const double> analytic,
                                        const GradCheckOptions& options) {
    if (theta.size() != analytic.size()) fail(ErrorKind::ShapeError, "gradient check: size mismatch");
    std::vector<double> probe(theta.begin(), theta.end());
    std::vector<std::size_t> idx = options.indices;
    if (idx.empty()) {
        idx.resize(theta.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    }
    GradCheckResult r;
    for (auto i : idx) {
        const double orig = probe.at(i);
        probe[i] = orig + options.h;
        const double fp = f(probe);
        probe[i] = orig - options.h;
        const double fm = f(probe);
        probe[i] = orig;
        const double numeric = (fp - fm) / (2.0 * options.h);
        const double a = analytic[i];
        const double denom = std::max({options.abs_floor, std::abs(a), std::abs(numeric)});
        const double err = std::abs(a - numeric) / denom;
        ++r.checked;
        if (err > r.max_rel_error || r.checked == 1) {
            if (err >= r.max_rel_error) {
                r.max_rel_error = err;
                r.worst_index = i;
                r.worst_analytic = a;
                r.worst_numeric = numeric;
            }
        }
    }
    return r;
}

}  // namespace pinnbridge::ad
