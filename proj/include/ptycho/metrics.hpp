#pragma once

#include <optional>
#include <vector>

#include "ptycho/field.hpp"

namespace ptycho {

/// Constant phase-offset estimate. Linear ramp terms are not fitted.
struct GlobalPhaseFit {
    double a = 0.0;
};

struct MetricsReport {
    double amp_mae = 0.0;
    double amp_nrmse = 0.0;
    double phase_mae = 0.0;
    double phase_nrmse = 0.0;
    GlobalPhaseFit phase_offset;
    std::size_t pixel_count = 0;
};

/// Mean |estimate - truth| over pixels with mask != 0.
double mae(const RealField& estimate, const RealField& truth, const RealField& mask);

/// Mean of (estimate - truth) over the mask.
GlobalPhaseFit fit_constant_offset(const RealField& estimate, const RealField& truth, const RealField& mask);

/// ||(estimate - ã) - truth|| / ||truth|| over the mask, with ã = 0 unless
/// `correct_offset` is set.
double nrmse(const RealField& estimate, const RealField& truth, const RealField& mask, bool correct_offset);

/// Multiplies T(row, col) by exp(i(a + b·col + c·row)).
ComplexField apply_global_phase_shift(const ComplexField& field, double a, double b, double c);

struct FrcCurve {
    std::vector<double> frequencies;  // ring radius / Nyquist radius
    std::vector<double> correlations;
    std::optional<double> crossing;  // first sustained drop below the threshold
};

inline constexpr double kFrcThreshold = 1.0 / 7.0;

/// Fourier ring correlation over 1-pixel rings (rounded radius) from DC to
/// Nyquist. Rings without energy in either image report 0. The crossing is the
/// first ring whose correlation and the next ring's are both below 1/7.
FrcCurve frc(const RealField& first, const RealField& second);

/// Amplitude NRMSE is uncorrected; phase NRMSE is offset-corrected.
MetricsReport report(const RealField& est_amp, const RealField& est_phase, const RealField& true_amp,
                     const RealField& true_phase, const RealField& mask);

}  // namespace ptycho
