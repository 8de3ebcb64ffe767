#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pinnbridge/core.hpp"
#include "pinnbridge/image.hpp"

namespace pinnbridge::vision {

inline constexpr int kMinImageSide = 8;

struct CornerPoint {
    double x = 0.0;
    double y = 0.0;
    double score = 0.0;

    bool operator==(const CornerPoint&) const = default;
};

struct BeamSegment {
    CornerPoint a;
    CornerPoint b;
    std::size_t a_index = 0;  // into the corner list the segment was built from
    std::size_t b_index = 0;
    double length_px = 0.0;
    double length_mm = 0.0;
    double angle_deg = 0.0;  // inclination to the image horizontal
};

struct JointAngle {
    std::size_t corner = 0;
    std::size_t first = 0;  // segment indices
    std::size_t second = 0;
    double angle_deg = 0.0;
};

struct PipelineConfig {
    int fast_threshold = 20;
    bool nonmax = true;
    double cluster_radius_px = 20.0;
    double zone_tolerance_px = 10.0;
    double edge_threshold = 30.0;
    int closing_radius = 1;  // 0 disables the closing stage
    bool refine_nodes = true;
    // Strand diameter is not measurable from the image; this value is passed through.
    double beam_diameter_mm = 1.9;
};

struct StageImages {
    GrayImage gray;
    GrayImage blurred;
    GrayImage laplacian;  // |response| clipped to 255
    GrayImage edges;
    RgbImage corners;
    RgbImage segments;
    RgbImage angles;
};

struct ExtractedParameters {
    int beam_count = 0;
    std::vector<double> beam_lengths_mm;
    std::vector<double> angles_deg;  // included angles at shared joints
    double scale_factor = 0.0;       // mm per pixel
    std::vector<CornerPoint> corners;
    std::vector<BeamSegment> segments;
    std::vector<JointAngle> joints;
    std::optional<StageImages> stages;

    double mean_angle_deg() const;
    // Ready for prediction, with default material and the configured diameter.
    BridgeParameters to_parameters(double beam_diameter_mm = 1.9) const;
};

GrayImage to_grayscale(const RgbImage& rgb);

// Normalized 5x5 kernel, sigma 1.1, replicated borders.
GrayImage gaussian_blur(const GrayImage& img);
std::array<double, 25> gaussian_kernel_5x5(double sigma = 1.1);

// 4-neighbour kernel, replicated borders.
ResponseGrid laplacian(const GrayImage& img);

GrayImage threshold_binary(const ResponseGrid& response, double threshold = 30.0);

// Square-window dilation followed by erosion; fills the one-pixel gaps the
// Laplacian zero crossing leaves inside each strand outline.
GrayImage close_mask(const GrayImage& mask, int radius = 1);

// FAST-9 on the radius-3 Bresenham circle.
std::vector<CornerPoint> fast_corners(const GrayImage& img, int t = 20, bool nonmax = true);
const std::array<std::pair<int, int>, 16>& fast_circle();

// Single-linkage merge of detections closer than radius; each group becomes
// its centroid carrying the summed score.
std::vector<CornerPoint> cluster_corners(const std::vector<CornerPoint>& corners, double radius_px);

std::vector<CornerPoint> zone_filter(const std::vector<CornerPoint>& corners, int width, int height,
                                     double tolerance_px = 10.0);

std::vector<BeamSegment> connect_nearest(const std::vector<CornerPoint>& corners);

// Clustered FAST responses sit inside the junction where several strands meet,
// which shortens the members attached to it. This moves each corner to the
// least-squares intersection of its incident strands' centre lines, fitted to
// the mask over the middle half of each segment. A corner keeps its position
// when it has fewer than two usable non-parallel strands or the move exceeds
// max_shift_px. Segment endpoints, lengths and angles follow the corners.
void refine_nodes(const GrayImage& mask, std::vector<CornerPoint>& corners, std::vector<BeamSegment>& segments,
                  double max_shift_px = 20.0);

// Slopes as dy/dx; std::nullopt marks a vertical line. Result in [0, 90].
double segment_angle(std::optional<double> m1, std::optional<double> m2);
std::optional<double> slope(const CornerPoint& a, const CornerPoint& b);

double segment_length(const CornerPoint& p1, const CornerPoint& p2, double scale_factor);

ExtractedParameters extract_parameters(const RgbImage& image, double scale_factor, const PipelineConfig& config = {},
                                       bool keep_stages = false);

// stage1_gray.png ... stage7_angles.png
void write_stages(const StageImages& stages, const std::filesystem::path& dir);

nlohmann::json to_json(const ExtractedParameters& ex);

// ---- synthetic renders -----------------------------------------------------------

struct TrussDrawing {
    std::vector<std::pair<double, double>> nodes_mm;  // x right, y up
    std::vector<std::pair<std::size_t, std::size_t>> members;
};

struct RenderSpec {
    double scale_mm_per_px = 0.5;
    double line_width_px = 4.0;
    int margin_px = 60;
};

struct RenderedTruss {
    RgbImage image;
    std::vector<std::pair<double, double>> nodes_px;  // image coordinates
};

// Black members on white, no anti-aliasing.
RenderedTruss render_truss(const TrussDrawing& truss, const RenderSpec& spec = {});

}  // namespace pinnbridge::vision
