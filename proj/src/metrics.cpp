#include "ptycho/metrics.hpp"

#include <cmath>

#include "ptycho/fft.hpp"

namespace ptycho {
namespace {

std::size_t check_masked(const RealField& estimate, const RealField& truth, const RealField& mask) {
    require_same_shape(estimate, truth, "estimate and truth differ in shape");
    require_same_shape(estimate, mask, "estimate and mask differ in shape");
    std::size_t count = 0;
    for (double m : mask) count += m != 0.0;
    if (count == 0) throw Error(ErrorCode::EmptyMask, "metric mask selects no pixels");
    return count;
}

}  // namespace

double mae(const RealField& estimate, const RealField& truth, const RealField& mask) {
    const std::size_t count = check_masked(estimate, truth, mask);
    double total = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] != 0.0) total += std::abs(estimate[i] - truth[i]);
    return total / static_cast<double>(count);
}

GlobalPhaseFit fit_constant_offset(const RealField& estimate, const RealField& truth, const RealField& mask) {
    const std::size_t count = check_masked(estimate, truth, mask);
    double total = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] != 0.0) total += estimate[i] - truth[i];
    return {total / static_cast<double>(count)};
}

double nrmse(const RealField& estimate, const RealField& truth, const RealField& mask, bool correct_offset) {
    check_masked(estimate, truth, mask);
    const double offset = correct_offset ? fit_constant_offset(estimate, truth, mask).a : 0.0;
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] == 0.0) continue;
        const double d = (estimate[i] - offset) - truth[i];
        err += d * d;
        norm += truth[i] * truth[i];
    }
    if (norm == 0.0) throw Error(ErrorCode::ZeroNormTruth, "truth has zero norm over the mask");
    return std::sqrt(err) / std::sqrt(norm);
}

ComplexField apply_global_phase_shift(const ComplexField& field, double a, double b, double c) {
    ComplexField out(field.shape());
    for (std::size_t r = 0; r < field.rows(); ++r)
        for (std::size_t col = 0; col < field.cols(); ++col)
            out(r, col) = field(r, col) * std::polar(1.0, a + b * static_cast<double>(col) + c * static_cast<double>(r));
    return out;
}

FrcCurve frc(const RealField& first, const RealField& second) {
    require_same_shape(first, second, "FRC inputs differ in shape");
    if (first.rows() != first.cols()) throw Error(ErrorCode::NonSquare, "FRC needs square images");

    const auto to_complex = [](const RealField& f) {
        ComplexField out(f.shape());
        for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i];
        return out;
    };
    const ComplexField s1 = dft2(to_complex(first));
    const ComplexField s2 = dft2(to_complex(second));

    const std::size_t n = first.rows();
    const std::size_t nyquist = n / 2;
    const std::size_t rings = nyquist + 1;
    std::vector<double> cross(rings, 0.0), power1(rings, 0.0), power2(rings, 0.0);
    const double center = static_cast<double>(n / 2);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const auto ring = static_cast<std::size_t>(std::lround(std::hypot(r - center, c - center)));
            if (ring >= rings) continue;
            const std::size_t i = r * n + c;
            cross[ring] += (s1[i] * std::conj(s2[i])).real();
            power1[ring] += std::norm(s1[i]);
            power2[ring] += std::norm(s2[i]);
        }
    }

    FrcCurve curve;
    for (std::size_t k = 0; k < rings; ++k) {
        curve.frequencies.push_back(nyquist > 0 ? static_cast<double>(k) / static_cast<double>(nyquist) : 0.0);
        const double denom = std::sqrt(power1[k] * power2[k]);
        curve.correlations.push_back(denom > 0.0 ? cross[k] / denom : 0.0);
    }
    for (std::size_t k = 0; k + 1 < rings; ++k) {
        if (curve.correlations[k] < kFrcThreshold && curve.correlations[k + 1] < kFrcThreshold) {
            curve.crossing = curve.frequencies[k];
            break;
        }
    }
    return curve;
}

MetricsReport report(const RealField& est_amp, const RealField& est_phase, const RealField& true_amp,
                     const RealField& true_phase, const RealField& mask) {
    MetricsReport out;
    out.pixel_count = check_masked(est_amp, true_amp, mask);
    check_masked(est_phase, true_phase, mask);
    out.amp_mae = mae(est_amp, true_amp, mask);
    out.amp_nrmse = nrmse(est_amp, true_amp, mask, false);
    out.phase_mae = mae(est_phase, true_phase, mask);
    out.phase_nrmse = nrmse(est_phase, true_phase, mask, true);
    out.phase_offset = fit_constant_offset(est_phase, true_phase, mask);
    return out;
}

}  // namespace ptycho
