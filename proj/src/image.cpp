#include "pinnbridge/image.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <png.h>

#include "pinnbridge/error.hpp"

namespace pinnbridge::vision {

RgbImage::RgbImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), data(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0) * 3, fill) {}

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

std::uint8_t GrayImage::clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return (*this)(x, y);
}

RgbImage to_rgb(const GrayImage& g) {
    RgbImage out(g.width, g.height);
    for (std::size_t i = 0; i < g.pixels.size(); ++i)
        out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = g.pixels[i];
    return out;
}

namespace {

constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
constexpr int kMaxDimension = 16384;

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        fail(ErrorKind::InvalidImage, std::string("PNG decode failed: ") + image.message);
    if (image.width == 0 || image.height == 0 || image.width > kMaxDimension || image.height > kMaxDimension) {
        png_image_free(&image);
        fail(ErrorKind::InvalidImage, "PNG dimensions out of range");
    }
    image.format = PNG_FORMAT_RGB;
    RgbImage out(static_cast<int>(image.width), static_cast<int>(image.height));
    // Composite any alpha onto white.
    png_color white{255, 255, 255};
    if (!png_image_finish_read(&image, &white, out.data.data(), 0, nullptr))
        fail(ErrorKind::InvalidImage, std::string("PNG decode failed: ") + image.message);
    return out;
}

class PpmReader {
public:
    explicit PpmReader(std::span<const std::uint8_t> b) : bytes_(b) {}

    int header_int() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail(ErrorKind::InvalidImage, "malformed PPM header");
        long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_++] - '0');
            if (v > kMaxDimension * 16L) fail(ErrorKind::InvalidImage, "PPM header value too large");
        }
        return static_cast<int>(v);
    }
    void expect_single_space() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail(ErrorKind::InvalidImage, "malformed PPM header");
        ++pos_;
    }
    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
    PpmReader r(bytes);
    r.advance(2);
    const int w = r.header_int();
    const int h = r.header_int();
    const int maxval = r.header_int();
    r.expect_single_space();
    if (w <= 0 || h <= 0 || w > kMaxDimension || h > kMaxDimension)
        fail(ErrorKind::InvalidImage, "PPM dimensions out of range");
    if (maxval != 255) fail(ErrorKind::InvalidImage, "only 8-bit PPM (maxval 255) is supported");
    RgbImage out(w, h);
    if (bytes.size() - r.pos() < out.data.size()) fail(ErrorKind::InvalidImage, "truncated PPM pixel data");
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos()), out.data.size(), out.data.begin());
    return out;
}

std::vector<std::uint8_t> encode_png_raw(const void* pixels, int w, int h, png_uint_32 format) {
    if (w <= 0 || h <= 0) fail(ErrorKind::InvalidImage, "cannot encode an empty image");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr))
        fail(ErrorKind::IoError, std::string("PNG encode failed: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr))
        fail(ErrorKind::IoError, std::string("PNG encode failed: ") + image.message);
    out.resize(size);
    return out;
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(ErrorKind::IoError, "write failed: " + path.string());
}

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin()))
        return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
    fail(ErrorKind::InvalidImage, "unrecognized image format (expected PNG or binary PPM)");
}

RgbImage read_image(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::IoError, "cannot open image " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    return encode_png_raw(img.data.data(), img.width, img.height, PNG_FORMAT_RGB);
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    return encode_png_raw(img.pixels.data(), img.width, img.height, PNG_FORMAT_GRAY);
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
    if (img.empty()) fail(ErrorKind::InvalidImage, "cannot encode an empty image");
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data.begin(), img.data.end());
    return out;
}

void write_png(const RgbImage& img, const std::filesystem::path& path) { write_bytes(encode_png(img), path); }
void write_png(const GrayImage& img, const std::filesystem::path& path) { write_bytes(encode_png(img), path); }
void write_ppm(const RgbImage& img, const std::filesystem::path& path) { write_bytes(encode_ppm(img), path); }

}  // namespace pinnbridge::vision
