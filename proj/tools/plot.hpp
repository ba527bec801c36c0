#pragma once

// Minimal static image output (binary PPM). No axes labels; the CSV files
// next to each image carry the numbers.

#include <cstdint>
#include <string>
#include <vector>

namespace ionforce::cli {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Image(int w, int h);
    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

void write_ppm(const Image& image, const std::string& path);

/// Row-major (rows x cols) panels drawn side by side with a diverging
/// blue-white-red map on [-limit, limit]. NaN cells are grey.
Image heatmap_panels(const std::vector<std::vector<double>>& panels, int rows, int cols, double limit,
                     int cell_px = 12);

/// Points with vertical error bars (blue) over a curve (red), y in [y_min, y_max].
Image curve_plot(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& y_err,
                 const std::vector<double>& curve_x, const std::vector<double>& curve_y, double y_min,
                 double y_max);

}  // namespace ionforce::cli
