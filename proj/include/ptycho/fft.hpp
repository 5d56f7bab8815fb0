#pragma once

#include <span>

#include "ptycho/field.hpp"

namespace ptycho {

/// Centered, unnormalized forward 2D DFT: fftshift(fft2(f)). The zero-frequency
/// bin sits at (rows/2, cols/2).
ComplexField dft2(const ComplexField& f);

/// Inverse of dft2: ifft2(ifftshift(F)) / (rows·cols).
ComplexField idft2(const ComplexField& spectrum);

/// Moves the zero-frequency bin from (0, 0) to (rows/2, cols/2).
template <class T>
Grid<T> fftshift(const Grid<T>& g) {
    Grid<T> out(g.shape());
    const std::size_t dr = g.rows() / 2;
    const std::size_t dc = g.cols() / 2;
    for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
            out((r + dr) % g.rows(), (c + dc) % g.cols()) = g(r, c);
        }
    }
    return out;
}

template <class T>
Grid<T> ifftshift(const Grid<T>& g) {
    Grid<T> out(g.shape());
    const std::size_t dr = g.rows() / 2;
    const std::size_t dc = g.cols() / 2;
    for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
            out(r, c) = g((r + dr) % g.rows(), (c + dc) % g.cols());
        }
    }
    return out;
}

/// Uncentered in-place transforms on row-major buffers of a fixed shape.
/// Plans are shared process-wide; executing them is thread-safe.
class FftPlan2d {
public:
    explicit FftPlan2d(Shape shape);

    Shape shape() const { return shape_; }

    /// Unnormalized forward transform.
    void forward(std::span<Complex> data) const;
    /// Unnormalized backward transform (no 1/N factor).
    void backward(std::span<Complex> data) const;

private:
    Shape shape_;
    void* forward_plan_;
    void* backward_plan_;
};

}  // namespace ptycho
