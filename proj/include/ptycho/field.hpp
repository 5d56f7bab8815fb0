#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "ptycho/error.hpp"

namespace ptycho {

using Complex = std::complex<double>;

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Integer pixel placement on a canvas, (row, col) of the top-left corner.
struct Offset {
    int row = 0;
    int col = 0;

    friend bool operator==(const Offset&, const Offset&) = default;
    friend auto operator<=>(const Offset&, const Offset&) = default;
};

/// Dense row-major 2D grid. Both dimensions are at least one.
template <class T>
class Grid {
public:
    using value_type = T;

    Grid() : Grid(1, 1) {}
    Grid(std::size_t rows, std::size_t cols, T fill = T{}) : shape_{rows, cols} {
        if (rows == 0 || cols == 0) {
            throw Error(ErrorCode::ShapeMismatch, "grid dimensions must be >= 1");
        }
        data_.assign(rows * cols, fill);
    }
    explicit Grid(Shape shape, T fill = T{}) : Grid(shape.rows, shape.cols, fill) {}
    Grid(std::size_t rows, std::size_t cols, std::vector<T> data) : shape_{rows, cols}, data_(std::move(data)) {
        if (rows == 0 || cols == 0 || data_.size() != rows * cols) {
            throw Error(ErrorCode::ShapeMismatch, "grid data length does not match dimensions");
        }
    }

    std::size_t rows() const { return shape_.rows; }
    std::size_t cols() const { return shape_.cols; }
    std::size_t size() const { return data_.size(); }
    Shape shape() const { return shape_; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

using RealField = Grid<double>;
using ComplexField = Grid<Complex>;

/// Throws ShapeMismatch unless `a` and `b` have the same shape.
template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw Error(ErrorCode::ShapeMismatch, what);
    }
}

/// Elementwise A·exp(iφ). Amplitude must lie in [0, 1] and phase in [-π, π].
ComplexField make_transmission(const RealField& amplitude, const RealField& phase);

struct AmplitudePhase {
    RealField amplitude;
    RealField phase;
};

/// Inverse of make_transmission. Phase is arg(T) in (-π, π], and 0 where |T| < 1e-12.
AmplitudePhase split_transmission(const ComplexField& field);

/// Copy of the `shape`-sized block of `src` whose top-left corner is at `at`.
template <class T>
Grid<T> crop(const Grid<T>& src, Offset at, Shape shape) {
    if (at.row < 0 || at.col < 0 || at.row + shape.rows > src.rows() || at.col + shape.cols > src.cols()) {
        throw Error(ErrorCode::PlanOutOfBounds, "crop window leaves the source grid");
    }
    Grid<T> out(shape);
    for (std::size_t r = 0; r < shape.rows; ++r) {
        for (std::size_t c = 0; c < shape.cols; ++c) {
            out(r, c) = src(at.row + r, at.col + c);
        }
    }
    return out;
}

/// Writes `src` into `dst` with its top-left corner at `at`.
template <class T>
void paste(Grid<T>& dst, const Grid<T>& src, Offset at) {
    if (at.row < 0 || at.col < 0 || at.row + src.rows() > dst.rows() || at.col + src.cols() > dst.cols()) {
        throw Error(ErrorCode::PlanOutOfBounds, "paste window leaves the destination grid");
    }
    for (std::size_t r = 0; r < src.rows(); ++r) {
        for (std::size_t c = 0; c < src.cols(); ++c) {
            dst(at.row + r, at.col + c) = src(r, c);
        }
    }
}

}  // namespace ptycho
