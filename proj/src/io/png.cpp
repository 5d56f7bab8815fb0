#include "ptycho/io/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace ptycho::io {

GrayImage to_gray(const RealField& field, double lo, double hi) {
    GrayImage img{field.rows(), field.cols(), std::vector<std::uint8_t>(field.size())};
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double t = std::clamp((field[i] - lo) / span, 0.0, 1.0);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * t));
    }
    return img;
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!file) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoError, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoError, "failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.cols), static_cast<png_uint_32>(image.rows), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < image.rows; ++r) {
        png_write_row(png, const_cast<png_bytep>(image.pixels.data() + r * image.cols));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

GrayImage render_line_plot(const std::vector<PlotSeries>& series, double y_lo, double y_hi, double reference,
                           std::size_t rows, std::size_t cols) {
    GrayImage img{rows, cols, std::vector<std::uint8_t>(rows * cols, 255)};
    const int margin = 20;
    const int width = static_cast<int>(cols) - 2 * margin;
    const int height = static_cast<int>(rows) - 2 * margin;
    const auto px = [&](double x) { return margin + static_cast<int>(std::lround(std::clamp(x, 0.0, 1.0) * width)); };
    const auto py = [&](double y) {
        const double t = std::clamp((y - y_lo) / (y_hi - y_lo), 0.0, 1.0);
        return margin + static_cast<int>(std::lround((1.0 - t) * height));
    };
    const auto plot = [&](int x, int y, std::uint8_t shade) {
        if (x >= 0 && y >= 0 && x < static_cast<int>(cols) && y < static_cast<int>(rows)) img.pixels[y * cols + x] = shade;
    };
    const auto line = [&](int x0, int y0, int x1, int y1, std::uint8_t shade) {
        const int steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1});
        for (int s = 0; s <= steps; ++s) {
            plot(x0 + (x1 - x0) * s / steps, y0 + (y1 - y0) * s / steps, shade);
        }
    };

    line(margin, margin + height, margin + width, margin + height, 0);
    line(margin, margin, margin, margin + height, 0);
    for (int x = margin; x <= margin + width; x += 6) line(x, py(reference), x + 2, py(reference), 96);
    for (const auto& s : series) {
        for (std::size_t i = 1; i < s.x.size() && i < s.y.size(); ++i) {
            line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), s.shade);
        }
    }
    return img;
}

}  // namespace ptycho::io
