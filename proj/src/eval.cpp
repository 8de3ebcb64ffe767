#include "pinnbridge/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "pinnbridge/error.hpp"

namespace pinnbridge::eval {

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void check_pair(std::span<const double> truth, std::span<const double> pred) {
    if (truth.size() != pred.size())
        fail(ErrorKind::ShapeError, "truth/prediction length mismatch (" + std::to_string(truth.size()) + " vs " +
                                        std::to_string(pred.size()) + ")");
    if (truth.empty()) fail(ErrorKind::InsufficientData, "metrics need at least one sample");
}

}  // namespace

Metrics compute_metrics(std::span<const double> truth, std::span<const double> pred) {
    check_pair(truth, pred);
    const double n = static_cast<double>(truth.size());
    double se = 0.0, ae = 0.0, mean_t = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = pred[i] - truth[i];
        se += d * d;
        ae += std::abs(d);
        mean_t += truth[i];
    }
    mean_t /= n;
    double ss_tot = 0.0;
    for (double t : truth) ss_tot += (t - mean_t) * (t - mean_t);

    Metrics m;
    m.count = truth.size();
    m.mse = se / n;
    m.rmse = std::sqrt(m.mse);
    m.mae = ae / n;
    if (ss_tot > 0.0) {
        m.r2 = 1.0 - se / ss_tot;
    } else {
        m.r2 = 0.0;
        m.r2_defined = false;
    }
    return m;
}

nlohmann::json to_json(const Metrics& m) {
    nlohmann::json j = {{"mse", m.mse}, {"rmse", m.rmse}, {"mae", m.mae}, {"count", m.count}};
    j["r2"] = m.r2_defined ? nlohmann::json(m.r2) : nlohmann::json(nullptr);
    return j;
}

RangeBreakdown range_breakdown(std::span<const double> truth, std::span<const double> pred) {
    check_pair(truth, pred);
    const double inf = std::numeric_limits<double>::infinity();
    RangeBreakdown rb;
    rb.bins = {
        {"below_20", -inf, 20.0, false, 0, std::nullopt},
        {"20-60", 20.0, 61.0, false, 0, std::nullopt},
        {"61-120", 61.0, 121.0, false, 0, std::nullopt},
        {"121-200", 121.0, 200.0, true, 0, std::nullopt},
        {"above_200", 200.0, inf, false, 0, std::nullopt},
    };
    for (auto& bin : rb.bins) {
        std::vector<double> t, p;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const double w = truth[i];
            bool in = false;
            if (bin.label == "above_200")
                in = w > 200.0;
            else
                in = w >= bin.lower && (bin.upper_inclusive ? w <= bin.upper : w < bin.upper);
            if (in) {
                t.push_back(truth[i]);
                p.push_back(pred[i]);
            }
        }
        bin.count = t.size();
        if (!t.empty()) bin.metrics = compute_metrics(t, p);
    }
    return rb;
}

std::size_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

namespace {

// Bins [k w, (k+1) w) aligned on multiples of the width; zero error lands in [0, w).
Histogram aligned_histogram(const std::vector<double>& values, double width) {
    Histogram h;
    h.bin_width = width;
    if (values.empty()) return h;
    auto index = [width](double v) { return static_cast<long>(std::floor(v / width)); };
    long lo = index(values.front()), hi = lo;
    for (double v : values) {
        lo = std::min(lo, index(v));
        hi = std::max(hi, index(v));
    }
    h.origin = static_cast<double>(lo) * width;
    h.counts.assign(static_cast<std::size_t>(hi - lo + 1), 0);
    for (double v : values) ++h.counts[static_cast<std::size_t>(index(v) - lo)];
    return h;
}

}  // namespace

ErrorDistribution error_distribution(std::span<const double> truth, std::span<const double> pred,
                                     double bin_width_abs, double bin_width_rel) {
    check_pair(truth, pred);
    if (!(bin_width_abs > 0.0) || !(bin_width_rel > 0.0))
        fail(ErrorKind::InvalidConfig, "histogram bin widths must be positive");
    std::vector<double> abs_err, rel_err;
    ErrorDistribution ed;
    std::size_t within = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        abs_err.push_back(std::abs(pred[i] - truth[i]));
        if (truth[i] == 0.0) {
            ++ed.excluded_zero_truth;
            continue;
        }
        const double rel = 100.0 * (pred[i] - truth[i]) / truth[i];
        rel_err.push_back(rel);
        if (std::abs(rel) <= 10.0 + 1e-9) ++within;
    }
    ed.absolute = aligned_histogram(abs_err, bin_width_abs);
    ed.relative = aligned_histogram(rel_err, bin_width_rel);
    ed.within_10_percent = rel_err.empty() ? 0.0 : static_cast<double>(within) / static_cast<double>(rel_err.size());
    return ed;
}

SensitivityReport feature_sensitivity(const StandardizedPredictor& f, const std::vector<FeatureVector>& x_std,
                                      double perturbation) {
    if (x_std.empty()) fail(ErrorKind::InsufficientData, "sensitivity needs at least one sample");
    SensitivityReport r;
    r.scores.assign(kFeatureCount, 0.0);
    const auto base = f(x_std);
    const double n = static_cast<double>(x_std.size());
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        auto up = x_std, down = x_std;
        for (auto& v : up) v[k] += perturbation;
        for (auto& v : down) v[k] -= perturbation;
        const auto pu = f(up);
        const auto pd = f(down);
        double s = 0.0;
        for (std::size_t i = 0; i < x_std.size(); ++i)
            s += 0.5 * (std::abs(pu[i] - base[i]) + std::abs(pd[i] - base[i]));
        r.scores[k] = s / n;
    }
    r.ranking.resize(kFeatureCount);
    std::iota(r.ranking.begin(), r.ranking.end(), std::size_t{0});
    std::stable_sort(r.ranking.begin(), r.ranking.end(),
                     [&](std::size_t a, std::size_t b) { return r.scores[a] > r.scores[b]; });
    return r;
}

SensitivityReport feature_sensitivity(const models::Regressor& model, const Dataset& ds, double perturbation,
                                      std::uint64_t /*seed*/) {
    std::vector<FeatureVector> x;
    for (const auto& v : ds.features()) x.push_back(standardize_apply(v, model.stats));
    auto f = [&model](const std::vector<FeatureVector>& rows) {
        ad::Tensor t = ad::Tensor::zeros(rows.size(), kFeatureCount);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t k = 0; k < kFeatureCount; ++k) t(i, k) = rows[i][k];
        return model.predict_standardized(t);
    };
    auto r = feature_sensitivity(f, x, perturbation);
    r.untrained_model = !model.trained;
    return r;
}

std::vector<ContributionRow> physics_contribution_report(const training::LossHistory& history) {
    if (history.epochs.empty()) fail(ErrorKind::InsufficientData, "empty loss history");
    std::vector<ContributionRow> rows;
    for (const auto& e : history.epochs) {
        double total = 0.0;
        for (const auto& [name, v] : e.residuals) total += v;
        for (const auto& [name, v] : e.residuals) {
            ContributionRow r;
            r.epoch = e.epoch;
            r.constraint = name;
            r.value = v;
            r.defined = total > 0.0;
            r.share = r.defined ? v / total : std::numeric_limits<double>::quiet_NaN();
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

std::string contribution_csv(const std::vector<ContributionRow>& rows) {
    std::ostringstream os;
    os << "epoch,constraint,value,share,defined\n";
    for (const auto& r : rows)
        os << r.epoch << ',' << r.constraint << ',' << num(r.value) << ',' << num(r.share) << ','
           << (r.defined ? 1 : 0) << '\n';
    return os.str();
}

double LinearBaseline::predict(const FeatureVector& raw) const {
    const auto z = standardize_apply(raw, stats);
    double y = coefficients.at(0);
    for (std::size_t k = 0; k < kFeatureCount; ++k) y += coefficients.at(k + 1) * z[k];
    return y;
}

LinearBaseline fit_linear_baseline(const std::vector<FeatureVector>& raw, std::span<const double> weights) {
    if (raw.size() != weights.size()) fail(ErrorKind::ShapeError, "feature/weight count mismatch");
    LinearBaseline lb;
    lb.stats = standardize_fit(raw);
    constexpr std::size_t p = kFeatureCount + 1;
    // Normal equations with a tiny ridge so constant (degenerate) columns stay solvable.
    std::array<std::array<double, p + 1>, p> a{};
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::array<double, p> x{};
        x[0] = 1.0;
        const auto z = standardize_apply(raw[i], lb.stats);
        for (std::size_t k = 0; k < kFeatureCount; ++k) x[k + 1] = z[k];
        for (std::size_t r = 0; r < p; ++r) {
            for (std::size_t c = 0; c < p; ++c) a[r][c] += x[r] * x[c];
            a[r][p] += x[r] * weights[i];
        }
    }
    for (std::size_t r = 1; r < p; ++r) a[r][r] += 1e-9;
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        if (std::abs(a[col][col]) < 1e-300) fail(ErrorKind::NumericalError, "singular least-squares system");
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
        }
    }
    lb.coefficients.resize(p);
    for (std::size_t r = 0; r < p; ++r) lb.coefficients[r] = a[r][p] / a[r][r];
    return lb;
}

std::string range_csv(const RangeBreakdown& rb) {
    std::ostringstream os;
    os << "bin,lower_g,upper_g,count,mse,rmse,mae,r2\n";
    for (const auto& b : rb.bins) {
        os << b.label << ',' << num(b.lower) << ',' << num(b.upper) << ',' << b.count;
        if (b.metrics)
            os << ',' << num(b.metrics->mse) << ',' << num(b.metrics->rmse) << ',' << num(b.metrics->mae) << ','
               << (b.metrics->r2_defined ? num(b.metrics->r2) : std::string("nan"));
        else
            os << ",,,,";
        os << '\n';
    }
    return os.str();
}

nlohmann::json range_json(const RangeBreakdown& rb) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& b : rb.bins) {
        nlohmann::json j = {{"bin", b.label}, {"count", b.count}};
        j["metrics"] = b.metrics ? to_json(*b.metrics) : nlohmann::json(nullptr);
        arr.push_back(j);
    }
    return arr;
}

std::string error_csv(const ErrorDistribution& ed) {
    std::ostringstream os;
    os << "kind,bin_center,count\n";
    auto emit = [&os](const char* kind, const Histogram& h) {
        for (std::size_t i = 0; i < h.counts.size(); ++i)
            os << kind << ',' << num(h.origin + (static_cast<double>(i) + 0.5) * h.bin_width) << ',' << h.counts[i]
               << '\n';
    };
    emit("absolute_g", ed.absolute);
    emit("relative_pct", ed.relative);
    return os.str();
}

std::string sensitivity_csv(const SensitivityReport& sr) {
    std::ostringstream os;
    os << "rank,feature,score\n";
    const auto& names = feature_names();
    for (std::size_t r = 0; r < sr.ranking.size(); ++r)
        os << r + 1 << ',' << names[sr.ranking[r]] << ',' << num(sr.scores[sr.ranking[r]]) << '\n';
    return os.str();
}

nlohmann::json sensitivity_json(const SensitivityReport& sr) {
    nlohmann::json j = {{"untrained_model", sr.untrained_model}, {"features", nlohmann::json::array()}};
    const auto& names = feature_names();
    for (auto k : sr.ranking) j["features"].push_back({{"feature", names[k]}, {"score", sr.scores[k]}});
    return j;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    f << text;
    if (!f) fail(ErrorKind::IoError, "write failed: " + path.string());
}

}  // namespace

nlohmann::json write_report(const models::Regressor& model, const Dataset& ds, const training::LossHistory* history,
                            const std::filesystem::path& dir) {
    if (ds.size() == 0) fail(ErrorKind::InsufficientData, "no samples to evaluate");
    std::filesystem::create_directories(dir);
    const auto truth = ds.weights();
    const auto pred = model.predict(ds.features());
    const auto m = compute_metrics(truth, pred);
    const auto rb = range_breakdown(truth, pred);
    const auto ed = error_distribution(truth, pred);
    const auto sr = feature_sensitivity(model, ds);

    auto doc = to_json(m);
    doc["arch"] = std::string(models::arch_tag(model.arch()));
    doc["within_10_percent"] = ed.within_10_percent;
    doc["range_breakdown"] = range_json(rb);
    doc["sensitivity"] = sensitivity_json(sr);

    write_text(dir / kMetricsFile, doc.dump(2) + "\n");
    write_text(dir / kRangeFile, range_csv(rb));
    write_text(dir / kErrorFile, error_csv(ed));
    write_text(dir / kSensitivityFile, sensitivity_csv(sr));
    if (history && !history->epochs.empty())
        write_text(dir / kContributionFile, contribution_csv(physics_contribution_report(*history)));
    else
        write_text(dir / kContributionFile, contribution_csv({}));
    return doc;
}

}  // namespace pinnbridge::eval
