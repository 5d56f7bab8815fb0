#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ptycho/field.hpp"

namespace ptycho::io {

/// 8-bit grayscale raster.
struct GrayImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;
};

/// Linear map [lo, hi] -> [0, 255], clamped. Fixed ranges keep previews diffable.
GrayImage to_gray(const RealField& field, double lo, double hi);

void write_png(const std::filesystem::path& path, const GrayImage& image);

struct PlotSeries {
    std::vector<double> x;
    std::vector<double> y;
    std::uint8_t shade = 0;
};

/// Line plot over x in [0, 1] and y in [y_lo, y_hi] with a dashed horizontal
/// reference line at `reference`.
GrayImage render_line_plot(const std::vector<PlotSeries>& series, double y_lo, double y_hi, double reference,
                           std::size_t rows = 300, std::size_t cols = 400);

}  // namespace ptycho::io
