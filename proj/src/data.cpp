#include "pinnbridge/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "pinnbridge/error.hpp"
#include "pinnbridge/physics.hpp"
#include "pinnbridge/rng.hpp"

namespace pinnbridge::data {

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols = {
        "id",             "beam_count",    "total_length_mm",    "mean_length_mm",     "beam_diameter_mm",
        "mean_angle_deg", "density_g_cm3", "youngs_modulus_gpa", "yield_strength_mpa", "weight_g",
    };
    return cols;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_number(const std::string& field, const std::string& column, std::size_t row) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || field.empty() || !std::isfinite(v))
        fail(ErrorKind::ParseError, "row " + std::to_string(row) + ": column '" + column +
                                        "' is not a number: '" + field + "'");
    return v;
}

std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

Dataset read_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    // Skip leading blank lines and a UTF-8 BOM.
    while (std::getline(in, line)) {
        ++line_no;
        if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) fail(ErrorKind::ParseError, "missing header row");

    const auto header = split_fields(line);
    std::map<std::string, std::size_t> col;
    const auto& known = csv_columns();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (std::find(known.begin(), known.end(), header[i]) == known.end())
            fail(ErrorKind::ParseError, "unknown column '" + header[i] + "' in header");
        if (!col.emplace(header[i], i).second)
            fail(ErrorKind::ParseError, "duplicate column '" + header[i] + "' in header");
    }
    for (const char* required : {"beam_count", "total_length_mm", "mean_length_mm", "beam_diameter_mm",
                                  "mean_angle_deg", "weight_g"})
        if (!col.count(required)) fail(ErrorKind::ParseError, std::string("missing required column '") + required + "'");

    Dataset ds;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++row;
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            fail(ErrorKind::ParseError, "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                            " fields, got " + std::to_string(fields.size()));
        auto num = [&](const char* name) { return parse_number(fields[col.at(name)], name, row); };
        auto opt = [&](const char* name, double fallback) {
            auto it = col.find(name);
            if (it == col.end() || fields[it->second].empty()) return fallback;
            return parse_number(fields[it->second], name, row);
        };

        BridgeSample s;
        const double count = num("beam_count");
        if (count != std::floor(count))
            fail(ErrorKind::ParseError, "row " + std::to_string(row) + ": beam_count must be an integer");
        s.params.geometry.beam_count = static_cast<int>(count);
        s.params.geometry.aggregate = LengthAggregate{num("total_length_mm"), num("mean_length_mm")};
        s.params.geometry.beam_diameter_mm = num("beam_diameter_mm");
        s.params.geometry.mean_angle_deg = num("mean_angle_deg");
        const MaterialProperties defaults;
        s.params.material.density_g_cm3 = opt("density_g_cm3", defaults.density_g_cm3);
        s.params.material.youngs_modulus_gpa = opt("youngs_modulus_gpa", defaults.youngs_modulus_gpa);
        s.params.material.yield_strength_mpa = opt("yield_strength_mpa", defaults.yield_strength_mpa);
        s.weight_g = num("weight_g");
        auto id_it = col.find("id");
        s.id = (id_it != col.end() && !fields[id_it->second].empty()) ? fields[id_it->second]
                                                                      : "row-" + std::to_string(row);
        if (!(s.weight_g > 0.0))
            fail(ErrorKind::InvalidSample, "row " + std::to_string(row) + ": weight_g must be positive");
        try {
            s.params.validate();
        } catch (const Error& e) {
            fail(ErrorKind::InvalidSample, "row " + std::to_string(row) + ": " + e.what());
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
    return read_csv(in);
}

void write_csv(const Dataset& ds, std::ostream& out) {
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& s : ds.samples) {
        const auto v = to_feature_vector(s.params);
        out << s.id;
        for (double x : v) out << ',' << format_number(x);
        out << ',' << format_number(s.weight_g) << '\n';
    }
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
    write_csv(ds, out);
}

namespace {

double clamp_band(double value, double source, double fraction) {
    const double lo = source * (1.0 - fraction);
    const double hi = source * (1.0 + fraction);
    return std::clamp(value, std::min(lo, hi), std::max(lo, hi));
}

double population_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

}  // namespace

Dataset augment(const Dataset& ds, const AugmentConfig& cfg) {
    if (ds.samples.empty()) fail(ErrorKind::InvalidConfig, "cannot augment an empty dataset");
    if (!(cfg.variation_fraction >= 0.0 && cfg.variation_fraction < 1.0))
        fail(ErrorKind::InvalidConfig, "variation_fraction must lie in [0, 1)");
    if (!(cfg.noise_sigma_fraction >= 0.0)) fail(ErrorKind::InvalidConfig, "noise_sigma_fraction must be >= 0");
    if (cfg.target_count < ds.samples.size())
        fail(ErrorKind::InvalidConfig, "target_count " + std::to_string(cfg.target_count) +
                                           " is below the source count " + std::to_string(ds.samples.size()));

    const auto feats = ds.features();
    std::array<double, kFeatureCount> sigma{};
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        std::vector<double> col;
        for (const auto& f : feats) col.push_back(f[k]);
        sigma[k] = cfg.noise_sigma_fraction * population_std(col);
    }
    const double weight_sigma = cfg.noise_sigma_fraction * population_std(ds.weights());
    const double v = cfg.variation_fraction;
    const auto slot = [](Feature f) { return static_cast<std::size_t>(f); };

    Dataset out;
    out.samples = ds.samples;
    const std::size_t n_src = ds.samples.size();
    for (std::size_t j = 0; out.samples.size() < cfg.target_count; ++j) {
        const auto& src = ds.samples[j % n_src];
        Rng rng = derive_rng(cfg.seed, j);
        auto jitter = [&] { return uniform(rng, 1.0 - v, 1.0 + v); };
        auto noise = [&](double s) { return s > 0.0 ? s * standard_normal(rng) : 0.0; };

        BridgeSample s = src;
        auto& g = s.params.geometry;
        const auto& sg = src.params.geometry;

        // (a) parameter variation
        if (!sg.beam_lengths_mm.empty()) {
            for (auto& l : g.beam_lengths_mm) l *= jitter();
        } else {
            const double u = jitter();
            g.aggregate = LengthAggregate{sg.aggregate->total_mm * u, sg.aggregate->mean_mm * u};
        }
        g.beam_diameter_mm = sg.beam_diameter_mm * jitter();
        g.mean_angle_deg = std::min(90.0, sg.mean_angle_deg * jitter());

        // (b) physics-consistent weight
        const double dr = g.beam_diameter_mm / sg.beam_diameter_mm;
        s.weight_g = src.weight_g * (g.total_length_mm() / sg.total_length_mm()) * dr * dr *
                     (s.params.material.density_g_cm3 / src.params.material.density_g_cm3);

        // (c) measurement noise, kept inside the variation band
        if (!sg.beam_lengths_mm.empty()) {
            for (std::size_t i = 0; i < g.beam_lengths_mm.size(); ++i)
                g.beam_lengths_mm[i] = clamp_band(g.beam_lengths_mm[i] + noise(sigma[slot(Feature::MeanLength)]),
                                                  sg.beam_lengths_mm[i], v);
        } else {
            g.aggregate->total_mm = clamp_band(g.aggregate->total_mm + noise(sigma[slot(Feature::TotalLength)]),
                                               sg.aggregate->total_mm, v);
            g.aggregate->mean_mm = clamp_band(g.aggregate->mean_mm + noise(sigma[slot(Feature::MeanLength)]),
                                              sg.aggregate->mean_mm, v);
        }
        g.beam_diameter_mm = clamp_band(g.beam_diameter_mm + noise(sigma[slot(Feature::BeamDiameter)]),
                                        sg.beam_diameter_mm, v);
        g.mean_angle_deg = std::min(90.0, clamp_band(g.mean_angle_deg + noise(sigma[slot(Feature::MeanAngle)]),
                                                     sg.mean_angle_deg, v));
        auto& m = s.params.material;
        m.density_g_cm3 = std::max(1e-6, m.density_g_cm3 + noise(sigma[slot(Feature::Density)]));
        m.youngs_modulus_gpa = std::max(1e-6, m.youngs_modulus_gpa + noise(sigma[slot(Feature::YoungsModulus)]));
        m.yield_strength_mpa = std::max(1e-6, m.yield_strength_mpa + noise(sigma[slot(Feature::YieldStrength)]));
        s.weight_g = std::max(1e-6, s.weight_g + noise(weight_sigma));

        s.id = src.id + "-aug" + std::to_string(j);
        out.samples.push_back(std::move(s));
    }
    return out;
}

Dataset synthesize(std::uint64_t seed, std::size_t n) {
    if (n < 5) fail(ErrorKind::InvalidConfig, "synthesize needs n >= 5");
    Dataset ds;
    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = derive_rng(seed, i);
        BridgeSample s;
        auto& g = s.params.geometry;
        g.beam_count = 10 + static_cast<int>(uniform_index(rng, 51));
        const double base = uniform(rng, 30.0, 150.0);
        g.beam_lengths_mm.resize(static_cast<std::size_t>(g.beam_count));
        for (auto& l : g.beam_lengths_mm) l = std::clamp(base * uniform(rng, 0.85, 1.15), 30.0, 150.0);
        g.beam_diameter_mm = uniform(rng, 1.8, 2.0);
        g.mean_angle_deg = uniform(rng, 20.0, 70.0);

        double overhead = 0.0;
        do {
            overhead = kOverheadMean + kOverheadSigma * standard_normal(rng);
        } while (overhead < kOverheadMin || overhead > kOverheadMax);
        s.weight_g = physics::weight_from_geometry(s.params) * overhead;
        s.id = "syn-" + std::to_string(i);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace pinnbridge::data
