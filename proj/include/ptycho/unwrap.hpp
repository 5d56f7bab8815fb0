#pragma once

#include "ptycho/field.hpp"

namespace ptycho {

/// Reliability-sorted, non-continuous-path 2D phase unwrapping restricted to
/// `mask`. Pixels are joined along edges in decreasing order of reliability
/// (inverse of the wrapped second difference over the 3×3 neighbourhood), and
/// each merge shifts the smaller group by a multiple of 2π. The result is
/// congruent to `wrapped` modulo 2π inside the mask and 0 outside it.
RealField unwrap_phase(const RealField& wrapped, const RealField& mask);

/// Wraps a value into (-π, π].
double wrap_to_pi(double value);

}  // namespace ptycho
