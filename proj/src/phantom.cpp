#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ptycho/forward_model.hpp"

namespace ptycho {
namespace {

// Explicit bit manipulation keeps draws identical across standard libraries.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double normal(std::mt19937_64& rng) {
    const double u1 = std::max(uniform01(rng), 1e-300);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RealField blobs(Shape s, std::mt19937_64& rng) {
    RealField f(s);
    const int count = 6 + static_cast<int>(rng() % 10);
    for (int k = 0; k < count; ++k) {
        const double cr = uniform(rng, 0.0, s.rows);
        const double cc = uniform(rng, 0.0, s.cols);
        const double sigma = uniform(rng, 5.0, 0.25 * std::min(s.rows, s.cols) + 6.0);
        const double weight = uniform(rng, -1.0, 1.0);
        for (std::size_t r = 0; r < s.rows; ++r) {
            for (std::size_t c = 0; c < s.cols; ++c) {
                const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
                f(r, c) += weight * std::exp(-0.5 * d2 / (sigma * sigma));
            }
        }
    }
    return f;
}

RealField text_like(Shape s, std::mt19937_64& rng) {
    RealField f(s);
    const int strokes = 12 + static_cast<int>(rng() % 12);
    for (int k = 0; k < strokes; ++k) {
        const bool horizontal = rng() & 1U;
        const double thick = uniform(rng, 4.0, 8.0);
        const double length = uniform(rng, 12.0, 0.5 * std::max(s.rows, s.cols));
        const double r0 = uniform(rng, 0.0, s.rows);
        const double c0 = uniform(rng, 0.0, s.cols);
        const double h = horizontal ? thick : length;
        const double w = horizontal ? length : thick;
        const double value = uniform(rng, 0.3, 1.0);
        for (std::size_t r = 0; r < s.rows; ++r)
            for (std::size_t c = 0; c < s.cols; ++c)
                if (r >= r0 && r < r0 + h && c >= c0 && c < c0 + w) f(r, c) = value;
    }
    return gaussian_blur(f, 1.5);
}

RealField gradients(Shape s, std::mt19937_64& rng) {
    RealField f(s);
    const double gr = uniform(rng, -1.0, 1.0), gc = uniform(rng, -1.0, 1.0);
    const int waves = 3 + static_cast<int>(rng() % 3);
    struct Wave { double kr, kc, phase, amp; };
    std::vector<Wave> ws;
    for (int k = 0; k < waves; ++k) {
        // Periods of at least 24 px keep the field smooth.
        const double period = uniform(rng, 24.0, 96.0);
        const double angle = uniform(rng, 0.0, std::numbers::pi);
        const double k0 = 2.0 * std::numbers::pi / period;
        ws.push_back({k0 * std::cos(angle), k0 * std::sin(angle), uniform(rng, 0.0, 2 * std::numbers::pi),
                      uniform(rng, 0.3, 1.0)});
    }
    for (std::size_t r = 0; r < s.rows; ++r) {
        for (std::size_t c = 0; c < s.cols; ++c) {
            double v = gr * r / s.rows + gc * c / s.cols;
            for (const auto& w : ws) v += w.amp * std::sin(w.kr * r + w.kc * c + w.phase);
            f(r, c) = v;
        }
    }
    return f;
}

RealField draw(PhantomKind kind, Shape s, std::mt19937_64& rng) {
    switch (kind) {
        case PhantomKind::Blobs: return blobs(s, rng);
        case PhantomKind::TextLike: return text_like(s, rng);
        case PhantomKind::Gradients: return gradients(s, rng);
    }
    return blobs(s, rng);
}

void rescale(RealField& f, double lo, double hi) {
    const auto [mn, mx] = std::minmax_element(f.begin(), f.end());
    const double a = *mn, b = *mx;
    for (auto& v : f) {
        v = b > a ? lo + (hi - lo) * (v - a) / (b - a) : 0.5 * (lo + hi);
        v = std::clamp(v, lo, hi);
    }
}

}  // namespace

PhantomKind parse_phantom_kind(std::string_view name) {
    if (name == "blobs") return PhantomKind::Blobs;
    if (name == "text-like") return PhantomKind::TextLike;
    if (name == "gradients") return PhantomKind::Gradients;
    throw Error(ErrorCode::InvalidConfig, "unknown phantom kind '" + std::string(name) + "'");
}

std::string_view to_string(PhantomKind kind) {
    switch (kind) {
        case PhantomKind::Blobs: return "blobs";
        case PhantomKind::TextLike: return "text-like";
        case PhantomKind::Gradients: return "gradients";
    }
    return "unknown";
}

RealField gaussian_blur(const RealField& f, double sigma) {
    if (!(sigma > 0.0)) return f;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& k : kernel) k /= sum;

    const long rows = static_cast<long>(f.rows()), cols = static_cast<long>(f.cols());
    RealField tmp(f.shape()), out(f.shape());
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * f(r, std::clamp(c + i, 0L, cols - 1));
            tmp(r, c) = acc;
        }
    }
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp(std::clamp(r + i, 0L, rows - 1), c);
            out(r, c) = acc;
        }
    }
    return out;
}

RealField smooth_noise(Shape shape, std::uint64_t seed, double sigma) {
    std::mt19937_64 rng(seed);
    RealField white(shape);
    for (auto& v : white) v = normal(rng);
    RealField f = gaussian_blur(white, sigma);
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    double var = 0.0;
    for (double v : f) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(f.size()));
    for (auto& v : f) v = sd > 0.0 ? (v - mean) / sd : 0.0;
    return f;
}

ComplexField make_phantom(Shape canvas, std::uint64_t seed, PhantomKind kind) {
    std::mt19937_64 amp_rng(seed * 2 + 1);
    std::mt19937_64 phase_rng(seed * 2 + 2);
    RealField amplitude = draw(kind, canvas, amp_rng);
    RealField phase = draw(kind, canvas, phase_rng);
    rescale(amplitude, 0.05, 1.0);
    // Stay strictly inside (-π, π) so -π never aliases to +π when the phase is read back with arg().
    constexpr double kPhaseLimit = std::numbers::pi - 1e-6;
    rescale(phase, -kPhaseLimit, kPhaseLimit);
    return make_transmission(amplitude, phase);
}

}  // namespace ptycho
