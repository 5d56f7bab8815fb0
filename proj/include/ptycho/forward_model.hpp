#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptycho/field.hpp"

namespace ptycho {

/// Default probe geometry. The radius is calibrated so that two probes in a
/// 128-pixel window displaced by 20 px share 68.7% of their support. The edge
/// is hard by default: a tapered rim adds barely lit pixels to the
/// illuminated region, and ePIE pins those down very slowly.
inline constexpr std::size_t kDefaultWindow = 128;
inline constexpr double kDefaultRadius = 40.5;
inline constexpr double kDefaultEdgeSmooth = 0.0;
inline constexpr double kDefaultPhaseCurvature = 0.0;

struct ProbeParams {
    std::size_t window = kDefaultWindow;
    double radius = kDefaultRadius;
    double edge_smooth = kDefaultEdgeSmooth;
    double phase_curvature = kDefaultPhaseCurvature;

    friend bool operator==(const ProbeParams&, const ProbeParams&) = default;
};

/// Disc illumination, centered at (window/2, window/2) and exactly zero at distances >= `radius`.
struct Probe {
    ProbeParams params;
    ComplexField field;

    std::size_t window() const { return params.window; }
    /// {0,1} plane marking |field| > 0.
    RealField support() const;
};

/// Amplitude 1 inside radius - edge_smooth, cosine taper to 0 at radius;
/// phase phase_curvature·(r/radius)² inside the disc.
Probe make_disc_probe(std::size_t window, double radius, double edge_smooth, double phase_curvature);

/// The calibrated default probe scaled to `window`.
Probe make_default_probe(std::size_t window = kDefaultWindow);

struct GridLayout {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;

    friend bool operator==(const GridLayout&, const GridLayout&) = default;
};

/// Ordered probe-window placements (top-left corners) on a canvas.
struct ScanPlan {
    std::vector<Offset> positions;
    std::size_t window = kDefaultWindow;
    Shape canvas;
    std::string kind = "grid";
    std::optional<GridLayout> grid;

    /// Throws PlanOutOfBounds for windows leaving the canvas and RangeViolation for duplicates.
    void validate() const;

    friend bool operator==(const ScanPlan&, const ScanPlan&) = default;
};

ScanPlan make_grid_plan(std::size_t rows, std::size_t cols, std::size_t offset, std::size_t window);

enum class AltLayout { Diamond, Parallelogram, Random, Count5, Count6, Count7, Count8 };

AltLayout parse_alt_layout(std::string_view name);
std::string_view to_string(AltLayout layout);

/// Nine-or-fewer position layouts at the default 20 px (per 128 px window) spacing.
ScanPlan make_alt_plan(AltLayout kind, std::size_t window, std::uint64_t seed);

/// Percentage of probe support shared with a copy displaced horizontally by `offset` pixels.
double overlap_percent(std::size_t offset, const Probe& probe);

/// Support pixels shared by two placed probe discs.
std::size_t support_overlap_pixels(const Probe& probe, Offset a, Offset b);

struct DiffractionStack {
    ScanPlan plan;
    std::vector<RealField> patterns;
};

/// I_j = |dft2(T_window_j · P)|² for each scan position.
DiffractionStack simulate_stack(const ComplexField& transmission, const Probe& probe, const ScanPlan& plan);

/// {0,1} union of probe supports placed at `positions` on a canvas.
RealField union_support(Shape canvas, const Probe& probe, const std::vector<Offset>& positions);

/// Up to nine diffraction patterns, each placed in its own channel at its
/// position relative to the group's bounding box.
struct InputSet {
    std::vector<std::size_t> indices;
    Offset origin;  // bounding-box corner on the full canvas
    std::vector<Offset> placements;
    std::vector<RealField> channels;
    RealField support_mask;
};

inline constexpr std::size_t kMaxSetChannels = 9;

InputSet assemble_input_set(const DiffractionStack& stack, const Probe& probe, const std::vector<std::size_t>& group);

/// Groups scan indices into sets of at most nine. Grids are tiled in 3×3 blocks
/// (the last block in each direction is anchored at the grid edge); other plans
/// with nine or fewer positions form one set.
std::vector<std::vector<std::size_t>> partition_into_sets(const ScanPlan& plan);

struct MaskedLabel {
    RealField amplitude;
    RealField phase;
    RealField mask;
};

/// Amplitude/phase of `transmission` inside the union of illuminated discs, 0 elsewhere.
MaskedLabel make_masked_label(const ComplexField& transmission, const Probe& probe, const std::vector<Offset>& positions);

enum class PhantomKind { Blobs, TextLike, Gradients };

PhantomKind parse_phantom_kind(std::string_view name);
std::string_view to_string(PhantomKind kind);

/// Smooth synthetic transmission: amplitude in [0.05, 1], phase in [-π, π].
ComplexField make_phantom(Shape canvas, std::uint64_t seed, PhantomKind kind);

/// Gaussian-filtered white noise normalized to zero mean and unit standard deviation.
RealField smooth_noise(Shape shape, std::uint64_t seed, double sigma);

/// Separable Gaussian filter with edge clamping.
RealField gaussian_blur(const RealField& f, double sigma);

}  // namespace ptycho
