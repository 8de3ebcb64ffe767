#include <doctest.h>

#include <string>

#include "pinnbridge/error.hpp"
#include "pinnbridge/image.hpp"

using namespace pinnbridge;
using namespace pinnbridge::vision;

namespace {

RgbImage gradient(int w, int h) {
    RgbImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto* p = img.at(x, y);
            p[0] = static_cast<std::uint8_t>(x * 7);
            p[1] = static_cast<std::uint8_t>(y * 11);
            p[2] = static_cast<std::uint8_t>((x + y) * 3);
        }
    return img;
}

ErrorKind decode_kind(const std::string& bytes) {
    try {
        decode_image(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::ContractError;
}

}  // namespace

TEST_SUITE("image") {

TEST_CASE("png round-trip is lossless") {
    const auto img = gradient(13, 9);
    const auto back = decode_image(encode_png(img));
    CHECK(back.width == 13);
    CHECK(back.height == 9);
    CHECK(back.data == img.data);
}

TEST_CASE("gray png decodes to equal channels") {
    GrayImage g(4, 3, 77);
    g(1, 1) = 200;
    const auto back = decode_image(encode_png(g));
    CHECK(back.at(1, 1)[0] == 200);
    CHECK(back.at(1, 1)[2] == 200);
    CHECK(back.at(0, 0)[1] == 77);
}

TEST_CASE("ppm round-trip") {
    const auto img = gradient(5, 4);
    const auto bytes = encode_ppm(img);
    CHECK(std::string(bytes.begin(), bytes.begin() + 2) == "P6");
    CHECK(decode_image(bytes).data == img.data);
}

TEST_CASE("ppm with comments in the header") {
    std::string bytes = "P6\n# made by hand\n2 1\n255\n";
    bytes += std::string("\x10\x20\x30\x40\x50\x60", 6);
    const auto img = decode_image(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
    CHECK(img.width == 2);
    CHECK(img.at(1, 0)[2] == 0x60);
}

TEST_CASE("undecodable bytes are invalid images") {
    CHECK(decode_kind("") == ErrorKind::InvalidImage);
    CHECK(decode_kind("GIF89a....") == ErrorKind::InvalidImage);
    CHECK(decode_kind("P6\n2 2\n255\nabc") == ErrorKind::InvalidImage);
    CHECK(decode_kind("P6\n2 2\n65535\n") == ErrorKind::InvalidImage);
    CHECK(decode_kind(std::string("\x89PNG\r\n\x1a\n", 8) + "garbage") == ErrorKind::InvalidImage);
}

TEST_CASE("replicated border access") {
    GrayImage g(3, 2);
    g(0, 0) = 1;
    g(2, 1) = 9;
    CHECK(g.clamped(-4, -1) == 1);
    CHECK(g.clamped(10, 10) == 9);
}

}
