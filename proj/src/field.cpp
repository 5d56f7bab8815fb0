#include "ptycho/field.hpp"

#include <cmath>
#include <numbers>

namespace ptycho {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::RangeViolation: return "RangeViolation";
        case ErrorCode::PlanOutOfBounds: return "PlanOutOfBounds";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::ZeroProbe: return "ZeroProbe";
        case ErrorCode::ZeroObjectWindow: return "ZeroObjectWindow";
        case ErrorCode::EmptyAfterCrop: return "EmptyAfterCrop";
        case ErrorCode::NoCoverage: return "NoCoverage";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::ZeroNormTruth: return "ZeroNormTruth";
        case ErrorCode::NonSquare: return "NonSquare";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::DataError: return "DataError";
    }
    return "Unknown";
}

ComplexField make_transmission(const RealField& amplitude, const RealField& phase) {
    require_same_shape(amplitude, phase, "amplitude and phase planes differ in shape");
    ComplexField out(amplitude.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double a = amplitude[i];
        const double p = phase[i];
        if (!(a >= 0.0 && a <= 1.0)) {
            throw Error(ErrorCode::RangeViolation, "amplitude sample outside [0, 1]");
        }
        if (!(p >= -std::numbers::pi && p <= std::numbers::pi)) {
            throw Error(ErrorCode::RangeViolation, "phase sample outside [-pi, pi]");
        }
        out[i] = std::polar(a, p);
    }
    return out;
}

AmplitudePhase split_transmission(const ComplexField& field) {
    AmplitudePhase out{RealField(field.shape()), RealField(field.shape())};
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double a = std::abs(field[i]);
        out.amplitude[i] = a;
        // arg(-1 - 0i) is -π; fold it onto +π so the range is (-π, π].
        double p = a < 1e-12 ? 0.0 : std::arg(field[i]);
        if (p <= -std::numbers::pi) p = std::numbers::pi;
        out.phase[i] = p;
    }
    return out;
}

}  // namespace ptycho
