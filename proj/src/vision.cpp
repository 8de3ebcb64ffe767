#include "pinnbridge/vision.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "pinnbridge/error.hpp"
#include "pinnbridge/params_json.hpp"

namespace pinnbridge::vision {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void require_size(int w, int h, int min_side, const char* what) {
    if (w <= 0 || h <= 0) fail(ErrorKind::InvalidImage, std::string(what) + ": empty image");
    if (w < min_side || h < min_side)
        fail(ErrorKind::InvalidImage, std::string(what) + ": image must be at least " + std::to_string(min_side) +
                                          "x" + std::to_string(min_side));
}

std::uint8_t round_to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

// ---- pixel stages ------------------------------------------------------------------

GrayImage to_grayscale(const RgbImage& rgb) {
    if (rgb.empty() || rgb.data.size() != static_cast<std::size_t>(rgb.width) * rgb.height * 3)
        fail(ErrorKind::InvalidImage, "to_grayscale: empty or malformed image");
    GrayImage out(rgb.width, rgb.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const auto* p = &rgb.data[3 * i];
        out.pixels[i] = round_to_byte(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
    }
    return out;
}

std::array<double, 25> gaussian_kernel_5x5(double sigma) {
    std::array<double, 25> k{};
    double sum = 0.0;
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k[(dy + 2) * 5 + (dx + 2)] = v;
            sum += v;
        }
    for (auto& v : k) v /= sum;
    return k;
}

GrayImage gaussian_blur(const GrayImage& img) {
    require_size(img.width, img.height, 5, "gaussian_blur");
    static const auto kernel = gaussian_kernel_5x5(1.1);
    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx) acc += kernel[(dy + 2) * 5 + (dx + 2)] * img.clamped(x + dx, y + dy);
            out(x, y) = round_to_byte(acc);
        }
    return out;
}

ResponseGrid laplacian(const GrayImage& img) {
    if (img.empty()) fail(ErrorKind::InvalidImage, "laplacian: empty image");
    ResponseGrid out{img.width, img.height, std::vector<std::int16_t>(img.pixels.size())};
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const int v = img.clamped(x - 1, y) + img.clamped(x + 1, y) + img.clamped(x, y - 1) +
                          img.clamped(x, y + 1) - 4 * img(x, y);
            out.values[static_cast<std::size_t>(y) * img.width + x] = static_cast<std::int16_t>(v);
        }
    return out;
}

GrayImage threshold_binary(const ResponseGrid& response, double threshold) {
    GrayImage out(response.width, response.height);
    for (std::size_t i = 0; i < response.values.size(); ++i)
        out.pixels[i] = std::abs(static_cast<double>(response.values[i])) > threshold ? 255 : 0;
    return out;
}

namespace {

GrayImage morph(const GrayImage& in, int radius, bool dilate) {
    // Separable min/max with replicated borders.
    GrayImage tmp(in.width, in.height), out(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            std::uint8_t v = in(x, y);
            for (int d = -radius; d <= radius; ++d)
                v = dilate ? std::max(v, in.clamped(x + d, y)) : std::min(v, in.clamped(x + d, y));
            tmp(x, y) = v;
        }
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            std::uint8_t v = tmp(x, y);
            for (int d = -radius; d <= radius; ++d)
                v = dilate ? std::max(v, tmp.clamped(x, y + d)) : std::min(v, tmp.clamped(x, y + d));
            out(x, y) = v;
        }
    return out;
}

}  // namespace

GrayImage close_mask(const GrayImage& mask, int radius) {
    if (radius < 0) fail(ErrorKind::InvalidConfig, "closing radius must be non-negative");
    if (mask.empty()) fail(ErrorKind::InvalidImage, "close_mask: empty image");
    if (radius == 0) return mask;
    return morph(morph(mask, radius, true), radius, false);
}

// ---- FAST ----------------------------------------------------------------------------

const std::array<std::pair<int, int>, 16>& fast_circle() {
    static const std::array<std::pair<int, int>, 16> circle = {{
        {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
        {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
    }};
    return circle;
}

namespace {

// Longest circular run of flagged circle pixels and the summed |diff| along it.
std::pair<int, int> best_arc(const std::array<int, 16>& diff, const std::array<bool, 16>& flag) {
    int best_len = 0, best_score = 0;
    for (int start = 0; start < 16; ++start) {
        if (!flag[start] || flag[(start + 15) % 16]) continue;  // runs begin after an unflagged pixel
        int len = 0, score = 0;
        while (len < 16 && flag[(start + len) % 16]) {
            score += std::abs(diff[(start + len) % 16]);
            ++len;
        }
        if (len > best_len || (len == best_len && score > best_score)) best_len = len, best_score = score;
    }
    if (best_len == 0 && flag[0]) {  // every pixel flagged
        best_len = 16;
        for (int d : diff) best_score += std::abs(d);
    }
    return {best_len, best_score};
}

}  // namespace

std::vector<CornerPoint> fast_corners(const GrayImage& img, int t, bool nonmax) {
    if (t <= 0) fail(ErrorKind::InvalidConfig, "FAST threshold must be positive");
    require_size(img.width, img.height, kMinImageSide, "fast_corners");
    const auto& circle = fast_circle();
    std::vector<int> score(img.pixels.size(), 0);

    for (int y = 3; y < img.height - 3; ++y)
        for (int x = 3; x < img.width - 3; ++x) {
            const int p = img(x, y);
            std::array<int, 16> diff{};
            std::array<bool, 16> brighter{}, darker{};
            for (int i = 0; i < 16; ++i) {
                diff[i] = img(x + circle[i].first, y + circle[i].second) - p;
                brighter[i] = diff[i] > t;
                darker[i] = diff[i] < -t;
            }
            const auto [bl, bs] = best_arc(diff, brighter);
            const auto [dl, ds] = best_arc(diff, darker);
            int s = 0;
            if (bl >= 9) s = std::max(s, bs);
            if (dl >= 9) s = std::max(s, ds);
            score[static_cast<std::size_t>(y) * img.width + x] = s;
        }

    std::vector<CornerPoint> out;
    for (int y = 3; y < img.height - 3; ++y)
        for (int x = 3; x < img.width - 3; ++x) {
            const int s = score[static_cast<std::size_t>(y) * img.width + x];
            if (s == 0) continue;
            bool keep = true;
            if (nonmax) {
                // Equal scores resolve in favour of the earlier pixel in raster order.
                for (int dy = -1; dy <= 1 && keep; ++dy)
                    for (int dx = -1; dx <= 1 && keep; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int q = score[static_cast<std::size_t>(y + dy) * img.width + (x + dx)];
                        const bool earlier = dy < 0 || (dy == 0 && dx < 0);
                        if (q > s || (q == s && earlier)) keep = false;
                    }
            }
            if (keep) out.push_back({static_cast<double>(x), static_cast<double>(y), static_cast<double>(s)});
        }
    return out;
}

// ---- corner post-processing -------------------------------------------------------------

std::vector<CornerPoint> cluster_corners(const std::vector<CornerPoint>& corners, double radius_px) {
    if (!(radius_px >= 0.0)) fail(ErrorKind::InvalidConfig, "cluster radius must be non-negative");
    const std::size_t n = corners.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    const double r2 = radius_px * radius_px;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = corners[i].x - corners[j].x, dy = corners[i].y - corners[j].y;
            if (dx * dx + dy * dy <= r2) {
                const auto a = find(i), b = find(j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
        }

    std::vector<CornerPoint> out;
    std::vector<std::size_t> members;
    for (std::size_t root = 0; root < n; ++root) {
        if (find(root) != root) continue;
        double sx = 0.0, sy = 0.0, ss = 0.0;
        std::size_t count = 0;
        for (std::size_t i = root; i < n; ++i)
            if (find(i) == root) sx += corners[i].x, sy += corners[i].y, ss += corners[i].score, ++count;
        out.push_back({sx / count, sy / count, ss});
    }
    return out;
}

std::vector<CornerPoint> zone_filter(const std::vector<CornerPoint>& corners, int width, int height,
                                     double tolerance_px) {
    if (corners.empty()) return {};
    if (width <= 0 || height <= 0) fail(ErrorKind::InvalidConfig, "zone_filter: image dimensions must be positive");
    auto zone_of = [&](const CornerPoint& c) {
        const int zx = std::clamp(static_cast<int>(3.0 * c.x / width), 0, 2);
        const int zy = std::clamp(static_cast<int>(3.0 * c.y / height), 0, 2);
        return zy * 3 + zx;
    };
    std::array<std::optional<std::size_t>, 9> best;
    double min_y = corners.front().y, max_y = corners.front().y;
    for (std::size_t i = 0; i < corners.size(); ++i) {
        auto& b = best[zone_of(corners[i])];
        if (!b || corners[i].score > corners[*b].score) b = i;
        min_y = std::min(min_y, corners[i].y);
        max_y = std::max(max_y, corners[i].y);
    }
    std::vector<CornerPoint> out;
    for (std::size_t i = 0; i < corners.size(); ++i) {
        const auto& c = corners[i];
        const bool zone_best = best[zone_of(c)] == i;
        const bool chord = std::abs(c.y - min_y) <= tolerance_px || std::abs(c.y - max_y) <= tolerance_px;
        if (zone_best || chord) out.push_back(c);
    }
    return out;
}

// ---- geometry ---------------------------------------------------------------------------

std::optional<double> slope(const CornerPoint& a, const CornerPoint& b) {
    const double dx = b.x - a.x;
    if (std::abs(dx) < 1e-12) return std::nullopt;
    return (b.y - a.y) / dx;
}

double segment_angle(std::optional<double> m1, std::optional<double> m2) {
    if (!m1 && !m2) return 0.0;
    if (!m1 || !m2) {
        const double m = m1 ? *m1 : *m2;
        return 90.0 - std::atan(std::abs(m)) * kRadToDeg;
    }
    const double denom = 1.0 + *m1 * *m2;
    if (denom == 0.0) return 90.0;
    return std::atan(std::abs((*m1 - *m2) / denom)) * kRadToDeg;
}

double segment_length(const CornerPoint& p1, const CornerPoint& p2, double scale_factor) {
    if (!(scale_factor > 0.0) || !std::isfinite(scale_factor))
        fail(ErrorKind::InvalidConfig, "scale_factor must be positive");
    return std::hypot(p2.x - p1.x, p2.y - p1.y) * scale_factor;
}

std::vector<BeamSegment> connect_nearest(const std::vector<CornerPoint>& corners) {
    const std::size_t n = corners.size();
    if (n < 2) fail(ErrorKind::NoStructure, "need at least 2 corners to form a beam");
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(j);
        auto manhattan = [&](std::size_t j) {
            return std::abs(corners[j].x - corners[i].x) + std::abs(corners[j].y - corners[i].y);
        };
        std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
            const double da = manhattan(a), db = manhattan(b);
            if (da != db) return da < db;
            if (corners[a].x != corners[b].x) return corners[a].x < corners[b].x;
            return corners[a].y < corners[b].y;
        });
        for (std::size_t k = 0; k < std::min<std::size_t>(2, others.size()); ++k)
            edges.insert({std::min(i, others[k]), std::max(i, others[k])});
    }
    std::vector<BeamSegment> out;
    for (const auto& [i, j] : edges) {
        BeamSegment s;
        s.a = corners[i];
        s.b = corners[j];
        s.a_index = i;
        s.b_index = j;
        s.length_px = std::hypot(s.b.x - s.a.x, s.b.y - s.a.y);
        s.length_mm = s.length_px;
        s.angle_deg = segment_angle(slope(s.a, s.b), 0.0);
        out.push_back(s);
    }
    return out;
}

namespace {

struct StrandLine {
    double x, y;    // a point on the line
    double ux, uy;  // unit direction
};

// Centre of the mask run nearest the segment axis, sampled across the middle
// half of the segment, then a total least squares line through those centres.
std::optional<StrandLine> strand_line(const GrayImage& mask, const CornerPoint& a, const CornerPoint& b) {
    constexpr double kReach = 12.0;
    constexpr double kStep = 0.5;
    const double dx = b.x - a.x, dy = b.y - a.y, len = std::hypot(dx, dy);
    if (len < 16.0) return std::nullopt;
    const double ux = dx / len, uy = dy / len, nx = -uy, ny = ux;

    std::vector<std::pair<double, double>> centres;
    for (double t = 0.25 * len; t <= 0.75 * len; t += 1.0) {
        const double cx = a.x + ux * t, cy = a.y + uy * t;
        std::optional<double> best;
        double run_start = 0.0;
        bool in_run = false;
        for (double o = -kReach; o <= kReach + kStep / 2; o += kStep) {
            const int x = static_cast<int>(std::lround(cx + nx * o));
            const int y = static_cast<int>(std::lround(cy + ny * o));
            const bool on = o <= kReach && x >= 0 && y >= 0 && x < mask.width && y < mask.height && mask(x, y) > 0;
            if (on && !in_run) run_start = o;
            if (!on && in_run) {
                const double mid = 0.5 * (run_start + o - kStep);
                if (!best || std::abs(mid) < std::abs(*best)) best = mid;
            }
            in_run = on;
        }
        if (best) centres.emplace_back(cx + nx * *best, cy + ny * *best);
    }
    if (centres.size() < 5) return std::nullopt;

    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : centres) mx += x, my += y;
    mx /= static_cast<double>(centres.size());
    my /= static_cast<double>(centres.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : centres) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    return StrandLine{mx, my, std::cos(theta), std::sin(theta)};
}

}  // namespace

void refine_nodes(const GrayImage& mask, std::vector<CornerPoint>& corners, std::vector<BeamSegment>& segments,
                  double max_shift_px) {
    std::vector<std::optional<StrandLine>> lines;
    for (const auto& s : segments) lines.push_back(strand_line(mask, s.a, s.b));

    std::vector<CornerPoint> refined = corners;
    for (std::size_t c = 0; c < corners.size(); ++c) {
        // Sum of (I - u u^T) over incident lines, and the same applied to their points.
        double a00 = 0.0, a01 = 0.0, a11 = 0.0, b0 = 0.0, b1 = 0.0;
        int used = 0;
        for (std::size_t s = 0; s < segments.size(); ++s) {
            if ((segments[s].a_index != c && segments[s].b_index != c) || !lines[s]) continue;
            const auto& l = *lines[s];
            const double p00 = 1.0 - l.ux * l.ux, p01 = -l.ux * l.uy, p11 = 1.0 - l.uy * l.uy;
            a00 += p00, a01 += p01, a11 += p11;
            b0 += p00 * l.x + p01 * l.y;
            b1 += p01 * l.x + p11 * l.y;
            ++used;
        }
        const double det = a00 * a11 - a01 * a01;
        // det is sin^2 of the angle between two lines; below ~10 degrees the intersection is unstable.
        if (used < 2 || det < 0.03) continue;
        const double x = (a11 * b0 - a01 * b1) / det;
        const double y = (a00 * b1 - a01 * b0) / det;
        if (std::hypot(x - corners[c].x, y - corners[c].y) > max_shift_px) continue;
        refined[c].x = x;
        refined[c].y = y;
    }
    corners = std::move(refined);
    for (auto& s : segments) {
        s.a = corners[s.a_index];
        s.b = corners[s.b_index];
        s.length_px = std::hypot(s.b.x - s.a.x, s.b.y - s.a.y);
        s.length_mm = s.length_px;
        s.angle_deg = segment_angle(slope(s.a, s.b), 0.0);
    }
}

// ---- drawing helpers for stage dumps ----------------------------------------------------

namespace {

void put(RgbImage& img, int x, int y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    std::copy(c.begin(), c.end(), img.at(x, y));
}

void draw_box(RgbImage& img, double cx, double cy, int half, std::array<std::uint8_t, 3> c) {
    const int x0 = static_cast<int>(std::lround(cx)), y0 = static_cast<int>(std::lround(cy));
    for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx)
            if (std::abs(dx) == half || std::abs(dy) == half) put(img, x0 + dx, y0 + dy, c);
}

void draw_line(RgbImage& img, const CornerPoint& a, const CornerPoint& b, std::array<std::uint8_t, 3> c) {
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int steps = std::max(1, static_cast<int>(std::ceil(len)));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const int x = static_cast<int>(std::lround(a.x + t * (b.x - a.x)));
        const int y = static_cast<int>(std::lround(a.y + t * (b.y - a.y)));
        put(img, x, y, c);
        put(img, x + 1, y, c);
        put(img, x, y + 1, c);
    }
}

constexpr std::array<std::uint8_t, 3> kRed{220, 30, 30};
constexpr std::array<std::uint8_t, 3> kGreen{20, 170, 60};
constexpr std::array<std::uint8_t, 3> kBlue{30, 80, 220};

}  // namespace

// ---- full pipeline ------------------------------------------------------------------------

double ExtractedParameters::mean_angle_deg() const {
    if (angles_deg.empty()) return 0.0;
    return std::accumulate(angles_deg.begin(), angles_deg.end(), 0.0) / static_cast<double>(angles_deg.size());
}

BridgeParameters ExtractedParameters::to_parameters(double beam_diameter_mm) const {
    BridgeParameters p;
    p.geometry.beam_count = beam_count;
    p.geometry.beam_lengths_mm = beam_lengths_mm;
    p.geometry.beam_diameter_mm = beam_diameter_mm;
    p.geometry.mean_angle_deg = mean_angle_deg();
    return p;
}

ExtractedParameters extract_parameters(const RgbImage& image, double scale_factor, const PipelineConfig& config,
                                       bool keep_stages) {
    if (!(scale_factor > 0.0) || !std::isfinite(scale_factor))
        fail(ErrorKind::InvalidConfig, "scale_factor must be positive");
    require_size(image.width, image.height, kMinImageSide, "extract_parameters");

    const GrayImage gray = to_grayscale(image);
    const GrayImage blurred = gaussian_blur(gray);
    const ResponseGrid response = laplacian(blurred);
    const GrayImage edges = close_mask(threshold_binary(response, config.edge_threshold), config.closing_radius);
    const auto raw = fast_corners(edges, config.fast_threshold, config.nonmax);
    const auto merged = cluster_corners(raw, config.cluster_radius_px);
    const auto corners = zone_filter(merged, image.width, image.height, config.zone_tolerance_px);
    if (corners.size() < 2)
        fail(ErrorKind::NoStructure, "found " + std::to_string(corners.size()) + " structural corner(s); need 2");

    ExtractedParameters ex;
    ex.scale_factor = scale_factor;
    ex.corners = corners;
    ex.segments = connect_nearest(corners);
    if (config.refine_nodes) refine_nodes(edges, ex.corners, ex.segments, config.cluster_radius_px);
    for (auto& s : ex.segments) {
        s.length_mm = segment_length(s.a, s.b, scale_factor);
        ex.beam_lengths_mm.push_back(s.length_mm);
    }
    ex.beam_count = static_cast<int>(ex.segments.size());

    for (std::size_t c = 0; c < corners.size(); ++c) {
        std::vector<std::size_t> incident;
        for (std::size_t s = 0; s < ex.segments.size(); ++s)
            if (ex.segments[s].a_index == c || ex.segments[s].b_index == c) incident.push_back(s);
        for (std::size_t i = 0; i < incident.size(); ++i)
            for (std::size_t j = i + 1; j < incident.size(); ++j) {
                const auto& s1 = ex.segments[incident[i]];
                const auto& s2 = ex.segments[incident[j]];
                const double a = segment_angle(slope(s1.a, s1.b), slope(s2.a, s2.b));
                ex.joints.push_back({c, incident[i], incident[j], a});
                ex.angles_deg.push_back(a);
            }
    }

    if (keep_stages) {
        StageImages st;
        st.gray = gray;
        st.blurred = blurred;
        st.laplacian = GrayImage(response.width, response.height);
        for (std::size_t i = 0; i < response.values.size(); ++i)
            st.laplacian.pixels[i] = static_cast<std::uint8_t>(std::min(255, std::abs(int{response.values[i]})));
        st.edges = edges;
        st.corners = to_rgb(gray);
        for (const auto& c : raw) put(st.corners, static_cast<int>(c.x), static_cast<int>(c.y), kBlue);
        for (const auto& c : corners) draw_box(st.corners, c.x, c.y, 4, kRed);
        st.segments = to_rgb(gray);
        for (const auto& s : ex.segments) draw_line(st.segments, s.a, s.b, kGreen);
        for (const auto& c : ex.corners) draw_box(st.segments, c.x, c.y, 4, kRed);
        st.angles = st.segments;
        for (const auto& j : ex.joints) draw_box(st.angles, ex.corners[j.corner].x, ex.corners[j.corner].y, 7, kBlue);
        ex.stages = std::move(st);
    }
    return ex;
}

void write_stages(const StageImages& st, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_png(st.gray, dir / "stage1_gray.png");
    write_png(st.blurred, dir / "stage2_blur.png");
    write_png(st.laplacian, dir / "stage3_laplacian.png");
    write_png(st.edges, dir / "stage4_edges.png");
    write_png(st.corners, dir / "stage5_corners.png");
    write_png(st.segments, dir / "stage6_segments.png");
    write_png(st.angles, dir / "stage7_angles.png");
}

nlohmann::json to_json(const ExtractedParameters& ex) {
    nlohmann::json corners = nlohmann::json::array();
    for (const auto& c : ex.corners) corners.push_back({{"x", c.x}, {"y", c.y}, {"score", c.score}});
    nlohmann::json segments = nlohmann::json::array();
    for (const auto& s : ex.segments)
        segments.push_back({{"from", s.a_index},
                            {"to", s.b_index},
                            {"length_px", s.length_px},
                            {"length_mm", s.length_mm},
                            {"angle_deg", s.angle_deg}});
    nlohmann::json joints = nlohmann::json::array();
    for (const auto& j : ex.joints)
        joints.push_back({{"corner", j.corner}, {"segments", {j.first, j.second}}, {"angle_deg", j.angle_deg}});
    return {
        {"beam_count", ex.beam_count},
        {"beam_lengths_mm", ex.beam_lengths_mm},
        {"angles_deg", ex.angles_deg},
        {"mean_angle_deg", ex.mean_angle_deg()},
        {"scale_factor_mm_per_px", ex.scale_factor},
        {"corners", corners},
        {"segments", segments},
        {"joints", joints},
        {"parameters", params_to_json(ex.to_parameters())},
    };
}

// ---- renderer ---------------------------------------------------------------------------------

RenderedTruss render_truss(const TrussDrawing& truss, const RenderSpec& spec) {
    if (truss.nodes_mm.empty()) fail(ErrorKind::InvalidConfig, "truss has no nodes");
    if (!(spec.scale_mm_per_px > 0.0)) fail(ErrorKind::InvalidConfig, "render scale must be positive");
    for (const auto& [a, b] : truss.members)
        if (a >= truss.nodes_mm.size() || b >= truss.nodes_mm.size())
            fail(ErrorKind::InvalidConfig, "member references a missing node");

    double min_x = truss.nodes_mm.front().first, max_x = min_x;
    double min_y = truss.nodes_mm.front().second, max_y = min_y;
    for (const auto& [x, y] : truss.nodes_mm) {
        min_x = std::min(min_x, x), max_x = std::max(max_x, x);
        min_y = std::min(min_y, y), max_y = std::max(max_y, y);
    }
    const int w = static_cast<int>(std::ceil((max_x - min_x) / spec.scale_mm_per_px)) + 2 * spec.margin_px;
    const int h = static_cast<int>(std::ceil((max_y - min_y) / spec.scale_mm_per_px)) + 2 * spec.margin_px;

    RenderedTruss out{RgbImage(w, h, 255), {}};
    for (const auto& [x, y] : truss.nodes_mm)
        out.nodes_px.emplace_back(spec.margin_px + (x - min_x) / spec.scale_mm_per_px,
                                  spec.margin_px + (max_y - y) / spec.scale_mm_per_px);

    const double half = spec.line_width_px / 2.0;
    for (const auto& [ia, ib] : truss.members) {
        const auto [ax, ay] = out.nodes_px[ia];
        const auto [bx, by] = out.nodes_px[ib];
        const double vx = bx - ax, vy = by - ay, len2 = vx * vx + vy * vy;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - half - 1)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(ax, bx) + half + 1)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - half - 1)));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(ay, by) + half + 1)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double t = len2 > 0 ? std::clamp(((x - ax) * vx + (y - ay) * vy) / len2, 0.0, 1.0) : 0.0;
                if (std::hypot(x - (ax + t * vx), y - (ay + t * vy)) <= half) put(out.image, x, y, {0, 0, 0});
            }
    }
    return out;
}

}  // namespace pinnbridge::vision
