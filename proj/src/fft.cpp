#include "ptycho/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace ptycho {
namespace {

// FFTW planning is not thread-safe, so all plans come from one locked cache and
// are never destroyed. FFTW_ESTIMATE keeps the chosen algorithm, and therefore
// every output bit, independent of timing measurements.
fftw_plan cached_plan(Shape shape, int sign) {
    static std::mutex mutex;
    static std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans;

    std::lock_guard lock(mutex);
    const auto key = std::make_tuple(shape.rows, shape.cols, sign);
    if (auto it = plans.find(key); it != plans.end()) return it->second;

    auto* buf = fftw_alloc_complex(shape.size());
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(shape.rows), static_cast<int>(shape.cols), buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    plans.emplace(key, plan);
    return plan;
}

fftw_complex* as_fftw(std::span<Complex> data) { return reinterpret_cast<fftw_complex*>(data.data()); }

}  // namespace

FftPlan2d::FftPlan2d(Shape shape)
    : shape_(shape),
      forward_plan_(cached_plan(shape, FFTW_FORWARD)),
      backward_plan_(cached_plan(shape, FFTW_BACKWARD)) {}

void FftPlan2d::forward(std::span<Complex> data) const {
    if (data.size() != shape_.size()) throw Error(ErrorCode::ShapeMismatch, "fft buffer size");
    fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), as_fftw(data), as_fftw(data));
}

void FftPlan2d::backward(std::span<Complex> data) const {
    if (data.size() != shape_.size()) throw Error(ErrorCode::ShapeMismatch, "fft buffer size");
    fftw_execute_dft(static_cast<fftw_plan>(backward_plan_), as_fftw(data), as_fftw(data));
}

ComplexField dft2(const ComplexField& f) {
    ComplexField work = f;
    FftPlan2d(f.shape()).forward(work.values());
    return fftshift(work);
}

ComplexField idft2(const ComplexField& spectrum) {
    ComplexField work = ifftshift(spectrum);
    FftPlan2d(spectrum.shape()).backward(work.values());
    const double scale = 1.0 / static_cast<double>(work.size());
    for (auto& v : work) v *= scale;
    return work;
}

}  // namespace ptycho
