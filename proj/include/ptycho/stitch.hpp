#pragma once

#include <optional>
#include <vector>

#include "ptycho/field.hpp"

namespace ptycho {

/// A local amplitude/phase estimate placed on the canvas at `origin`.
/// Planes are zero wherever `support_mask` is 0.
struct PatchPrediction {
    RealField amplitude;
    RealField phase;
    RealField support_mask;
    Offset origin;
};

struct StitchConfig {
    std::size_t crop_margin = 0;
    /// Length of the linear taper in pixels; nullopt spans the whole pairwise overlap.
    std::optional<std::size_t> taper_width;

    void validate() const;
};

/// Erodes the support by `crop_margin` (square structuring element, patch
/// borders count as outside) and crops to the bounding box of what remains.
PatchPrediction crop_patch(const PatchPrediction& patch, const StitchConfig& cfg);

/// Feathering weights for already-cropped patches. Inside each pairwise
/// overlap the weight of a patch ramps linearly from 0 at its own edge to the
/// point where the neighbour's edge enters it; ramps from several neighbours
/// multiply and the result is renormalized so weights sum to 1 on every covered
/// canvas pixel. Each returned plane has its patch's shape and origin.
std::vector<RealField> feather_weights(const std::vector<PatchPrediction>& patches, Shape canvas,
                                       const StitchConfig& cfg = {});

struct StitchResult {
    RealField amplitude;
    RealField phase;
    RealField coverage;  // Σ weights: 1 where covered, 0 elsewhere
};

/// Crop, feather, and sum. Phase is blended as raw values.
StitchResult stitch(const std::vector<PatchPrediction>& patches, Shape canvas, const StitchConfig& cfg);

}  // namespace ptycho
