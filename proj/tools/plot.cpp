#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "ionforce/errors.hpp"

namespace ionforce::cli {

Image::Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 255) {}

void Image::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
}

void write_ppm(const Image& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError(fmt::format("cannot write image '{}'", path));
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
}

Image heatmap_panels(const std::vector<std::vector<double>>& panels, int rows, int cols, double limit,
                     int cell_px) {
    constexpr int gap = 8;
    const int count = static_cast<int>(panels.size());
    Image img(count * cols * cell_px + (count + 1) * gap, rows * cell_px + 2 * gap);
    for (int p = 0; p < count; ++p) {
        const int x0 = gap + p * (cols * cell_px + gap);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                const double v = panels[p][static_cast<std::size_t>(r) * cols + c];
                std::uint8_t R = 160, G = 160, B = 160;
                if (std::isfinite(v)) {
                    const double t = std::clamp(v / limit, -1.0, 1.0);
                    const auto fade = static_cast<std::uint8_t>(255.0 * (1.0 - std::abs(t)));
                    R = t < 0 ? fade : 255;
                    B = t > 0 ? fade : 255;
                    G = fade;
                }
                // Row 0 at the bottom.
                const int top = gap + (rows - 1 - r) * cell_px;
                for (int dy = 0; dy < cell_px; ++dy) {
                    for (int dx = 0; dx < cell_px; ++dx) img.set(x0 + c * cell_px + dx, top + dy, R, G, B);
                }
            }
        }
    }
    return img;
}

namespace {

void line(Image& img, int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        img.set(x0, y0, r, g, b);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace

Image curve_plot(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& y_err,
                 const std::vector<double>& curve_x, const std::vector<double>& curve_y, double y_min,
                 double y_max) {
    constexpr int W = 720, H = 420, M = 30;
    Image img(W, H);
    double x_min = INFINITY, x_max = -INFINITY;
    for (double v : x) x_min = std::min(x_min, v), x_max = std::max(x_max, v);
    for (double v : curve_x) x_min = std::min(x_min, v), x_max = std::max(x_max, v);
    if (!(x_max > x_min)) x_max = x_min + 1.0;
    const auto px = [&](double v) { return M + static_cast<int>(std::lround((v - x_min) / (x_max - x_min) * (W - 2 * M))); };
    const auto py = [&](double v) {
        const double t = std::clamp((v - y_min) / (y_max - y_min), -0.05, 1.05);
        return H - M - static_cast<int>(std::lround(t * (H - 2 * M)));
    };

    line(img, M, H - M, W - M, H - M, 0, 0, 0);
    line(img, M, M, M, H - M, 0, 0, 0);
    if (y_min < 0.0 && y_max > 0.0) line(img, M, py(0.0), W - M, py(0.0), 190, 190, 190);

    for (std::size_t i = 1; i < curve_x.size(); ++i) {
        line(img, px(curve_x[i - 1]), py(curve_y[i - 1]), px(curve_x[i]), py(curve_y[i]), 210, 30, 30);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(y[i])) continue;
        const int cx = px(x[i]);
        if (i < y_err.size() && std::isfinite(y_err[i])) {
            line(img, cx, py(y[i] - y_err[i]), cx, py(y[i] + y_err[i]), 40, 60, 200);
        }
        for (int d = -2; d <= 2; ++d) {
            line(img, cx - 2, py(y[i]) + d, cx + 2, py(y[i]) + d, 40, 60, 200);
        }
    }
    return img;
}

}  // namespace ionforce::cli
