#include "m2fn/image.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "m2fn/common.hpp"

namespace m2fn {

Image::Image(int w, int h, std::array<std::uint8_t, 3> fill) : width(w), height(h) {
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill[0];
        pixels[i + 1] = fill[1];
        pixels[i + 2] = fill[2];
    }
}

void Image::fill_rect(int x0, int y0, int w, int h, std::array<std::uint8_t, 3> color) {
    int x1 = std::min(x0 + w, width);
    int y1 = std::min(y0 + h, height);
    for (int y = std::max(0, y0); y < y1; ++y)
        for (int x = std::max(0, x0); x < x1; ++x) {
            auto* p = at(x, y);
            p[0] = color[0];
            p[1] = color[1];
            p[2] = color[2];
        }
}

void Image::fill_circle(int cx, int cy, int r, std::array<std::uint8_t, 3> color) {
    for (int y = std::max(0, cy - r); y <= std::min(height - 1, cy + r); ++y)
        for (int x = std::max(0, cx - r); x <= std::min(width - 1, cx + r); ++x) {
            int dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy <= r * r) {
                auto* p = at(x, y);
                p[0] = color[0];
                p[1] = color[1];
                p[2] = color[2];
            }
        }
}

namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v & 0xff));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

}  // namespace

void write_bmp(const Image& img, const std::string& path) {
    const int row_bytes = img.width * 3;
    const int pad = (4 - row_bytes % 4) % 4;
    const std::uint32_t data_size = static_cast<std::uint32_t>((row_bytes + pad) * img.height);
    const std::uint32_t file_size = 54 + data_size;

    std::vector<std::uint8_t> out;
    out.reserve(file_size);
    out.push_back('B');
    out.push_back('M');
    put_u32(out, file_size);
    put_u32(out, 0);
    put_u32(out, 54);
    put_u32(out, 40);
    put_u32(out, static_cast<std::uint32_t>(img.width));
    put_u32(out, static_cast<std::uint32_t>(img.height));
    put_u16(out, 1);
    put_u16(out, 24);
    put_u32(out, 0);
    put_u32(out, data_size);
    put_u32(out, 2835);
    put_u32(out, 2835);
    put_u32(out, 0);
    put_u32(out, 0);

    // BMP stores rows bottom-up, BGR order.
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.at(x, y);
            out.push_back(p[2]);
            out.push_back(p[1]);
            out.push_back(p[0]);
        }
        for (int i = 0; i < pad; ++i) out.push_back(0);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

Image read_bmp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 54 || buf[0] != 'B' || buf[1] != 'M') throw DataError("not a BMP file: " + path);
    auto u32 = [&](std::size_t off) {
        return std::uint32_t(buf[off]) | (std::uint32_t(buf[off + 1]) << 8) |
               (std::uint32_t(buf[off + 2]) << 16) | (std::uint32_t(buf[off + 3]) << 24);
    };
    auto u16 = [&](std::size_t off) { return std::uint16_t(buf[off]) | (std::uint16_t(buf[off + 1]) << 8); };
    if (u16(28) != 24 || u32(30) != 0) throw DataError("unsupported BMP variant: " + path);
    int w = static_cast<int>(u32(18));
    int h = static_cast<int>(u32(22));
    std::uint32_t off = u32(10);
    int row_bytes = w * 3;
    int pad = (4 - row_bytes % 4) % 4;
    if (buf.size() < off + static_cast<std::size_t>(row_bytes + pad) * h) throw DataError("truncated BMP: " + path);

    Image img(w, h);
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x) {
            auto* p = img.at(x, y);
            p[2] = buf[off++];
            p[1] = buf[off++];
            p[0] = buf[off++];
        }
        off += static_cast<std::uint32_t>(pad);
    }
    return img;
}

Image resize_nearest(const Image& img, int new_w, int new_h) {
    Image out(new_w, new_h);
    for (int y = 0; y < new_h; ++y) {
        int sy = std::min(img.height - 1, y * img.height / new_h);
        for (int x = 0; x < new_w; ++x) {
            int sx = std::min(img.width - 1, x * img.width / new_w);
            std::memcpy(out.at(x, y), img.at(sx, sy), 3);
        }
    }
    return out;
}

}  // namespace m2fn
