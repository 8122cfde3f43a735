#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace m2fn {

// Interleaved RGB, row-major, 8 bits per channel.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // size = width * height * 3

    Image() = default;
    Image(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0});

    std::uint8_t* at(int x, int y) { return pixels.data() + 3 * (y * width + x); }
    const std::uint8_t* at(int x, int y) const { return pixels.data() + 3 * (y * width + x); }

    void fill_rect(int x0, int y0, int w, int h, std::array<std::uint8_t, 3> color);
    void fill_circle(int cx, int cy, int r, std::array<std::uint8_t, 3> color);
};

// 24-bit uncompressed BMP. Deterministic bytes for identical images.
void write_bmp(const Image& img, const std::string& path);
Image read_bmp(const std::string& path);

Image resize_nearest(const Image& img, int new_w, int new_h);

}  // namespace m2fn
