#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pinnbridge::vision {

// Interleaved 8-bit RGB, row-major.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int w, int h, std::uint8_t fill = 255);

    bool empty() const { return width <= 0 || height <= 0; }
    std::uint8_t* at(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* at(int x, int y) const { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0);

    bool empty() const { return width <= 0 || height <= 0; }
    std::uint8_t& operator()(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t operator()(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    // Replicated border.
    std::uint8_t clamped(int x, int y) const;

    bool operator==(const GrayImage&) const = default;
};

// Signed filter output.
struct ResponseGrid {
    int width = 0;
    int height = 0;
    std::vector<std::int16_t> values;

    std::int16_t operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// PNG (any libpng-readable colour type) or binary PPM (P6, maxval 255).
// Throws InvalidImage when the bytes decode as neither.
RgbImage decode_image(std::span<const std::uint8_t> bytes);
RgbImage read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RgbImage& img);
std::vector<std::uint8_t> encode_png(const GrayImage& img);
std::vector<std::uint8_t> encode_ppm(const RgbImage& img);

void write_png(const RgbImage& img, const std::filesystem::path& path);
void write_png(const GrayImage& img, const std::filesystem::path& path);
void write_ppm(const RgbImage& img, const std::filesystem::path& path);

RgbImage to_rgb(const GrayImage& g);

}  // namespace pinnbridge::vision
