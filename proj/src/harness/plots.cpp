#include "m2fn/harness/plots.hpp"

#include <algorithm>
#include <cmath>

namespace m2fn::harness {

namespace {

constexpr std::array<std::uint8_t, 3> kWhite = {255, 255, 255};
constexpr std::array<std::uint8_t, 3> kAxis = {40, 40, 40};
constexpr std::array<std::uint8_t, 3> kSeries = {30, 90, 200};
constexpr std::array<std::uint8_t, 3> kBar = {60, 140, 80};

void draw_line(Image& img, int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> color) {
    // Bresenham
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    int x = x0, y = y0;
    while (true) {
        if (x >= 0 && x < img.width && y >= 0 && y < img.height) {
            std::uint8_t* px = img.at(x, y);
            px[0] = color[0];
            px[1] = color[1];
            px[2] = color[2];
        }
        if (x == x1 && y == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y += sy;
        }
    }
}

struct Frame {
    int left = 50, right = 20, top = 20, bottom = 40;
    int width = 640, height = 400;

    int plot_w() const { return width - left - right; }
    int plot_h() const { return height - top - bottom; }

    Image canvas() const {
        Image img(width, height, kWhite);
        draw_line(img, left, top, left, height - bottom, kAxis);
        draw_line(img, left, height - bottom, width - right, height - bottom, kAxis);
        return img;
    }

    int px(double frac) const { return left + static_cast<int>(std::lround(frac * (plot_w() - 1))); }
    int py(double frac) const {
        return top + plot_h() - 1 - static_cast<int>(std::lround(frac * (plot_h() - 1)));
    }
};

}  // namespace

Image render_loss_curve(const std::vector<EpochStat>& stats) {
    if (stats.empty()) throw DataError("nothing to plot: no epochs recorded");
    Frame f;
    Image img = f.canvas();

    double lo = stats.front().train_loss, hi = lo;
    for (const auto& s : stats) {
        lo = std::min(lo, s.train_loss);
        hi = std::max(hi, s.train_loss);
    }
    if (hi <= lo) hi = lo + 1.0;

    const std::size_t n = stats.size();
    int prev_x = 0, prev_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xf = n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
        const double yf = (stats[i].train_loss - lo) / (hi - lo);
        const int x = f.px(xf), y = f.py(yf);
        if (i > 0) draw_line(img, prev_x, prev_y, x, y, kSeries);
        // point marker
        img.fill_rect(x - 1, y - 1, 3, 3, kSeries);
        prev_x = x;
        prev_y = y;
    }
    return img;
}

void plot_loss_curve(const std::vector<EpochStat>& stats, const std::string& path) {
    write_bmp(render_loss_curve(stats), path);
}

Image render_ablation_bars(const std::vector<AblationRow>& rows) {
    std::vector<const AblationRow*> good;
    for (const auto& r : rows)
        if (r.ok) good.push_back(&r);
    if (good.empty()) throw DataError("nothing to plot: the ablation grid has no successful rows");

    Frame f;
    Image img = f.canvas();
    double hi = 0;
    for (const AblationRow* r : good) hi = std::max(hi, std::abs(r->report.sprc_mean));
    if (hi <= 0) hi = 1.0;

    const int n = static_cast<int>(good.size());
    const int slot = f.plot_w() / n;
    const int bar_w = std::max(2, (slot * 3) / 5);
    for (int i = 0; i < n; ++i) {
        const double v = std::clamp(good[static_cast<std::size_t>(i)]->report.sprc_mean / hi, 0.0, 1.0);
        const int x = f.left + i * slot + (slot - bar_w) / 2;
        const int y_top = f.py(v);
        const int y_base = f.py(0.0);
        img.fill_rect(x, y_top, bar_w, std::max(1, y_base - y_top + 1), kBar);
    }
    return img;
}

void plot_ablation_bars(const std::vector<AblationRow>& rows, const std::string& path) {
    write_bmp(render_ablation_bars(rows), path);
}

void plot_heatmap_overlay(const Image& base, const Heatmap& hm, const std::string& path) {
    write_bmp(overlay_heatmap(base, hm), path);
}

}  // namespace m2fn::harness
