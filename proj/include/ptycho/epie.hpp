#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ptycho/field.hpp"
#include "ptycho/forward_model.hpp"

namespace ptycho {

enum class ScanOrder { Sequential, Shuffled };

struct EpieConfig {
    double alpha = 1.0;  // object step size
    double beta = 1.0;   // probe step size
    std::size_t max_iterations = 1500;
    /// Stop when |SSE_k - SSE_{k-1}| / SSE_{k-1} falls below this.
    double sse_rel_tol = 1e-6;
    /// Also stop once SSE_k / Σ I² falls below this (data already fitted to rounding level).
    double sse_abs_tol = 1e-12;
    bool update_probe = false;
    ScanOrder scan_order = ScanOrder::Sequential;
    std::uint64_t shuffle_seed = 0;

    /// Throws InvalidConfig when a field is out of range.
    void validate() const;
};

/// Solver state. `sse_history[k-1]` is the error logged during sweep k.
struct ReconState {
    ComplexField object;
    ComplexField probe;
    RealField probe_support;  // finite-support constraint S, taken from the initial probe
    std::size_t iteration = 0;
    std::vector<double> sse_history;
};

/// Cold start is an all-ones object with zero phase. The probe is copied.
ReconState init_state(const ScanPlan& plan, const Probe& probe_estimate,
                      const std::optional<ComplexField>& object_init = std::nullopt);

/// One full sweep over every scan position; appends the sweep's SSE.
ReconState epie_iteration(ReconState state, const DiffractionStack& stack, const EpieConfig& cfg);

/// Σ_j Σ_uv (I_j - |dft2(T_j · P)|²)² evaluated at the given state.
double sse(const DiffractionStack& stack, const ReconState& state);

using IterationObserver = std::function<void(std::size_t iteration, double sse)>;

struct EpieResult {
    ReconState state;
    bool converged = false;
};

EpieResult run_epie(const DiffractionStack& stack, const Probe& probe_estimate, const EpieConfig& cfg,
                    const std::optional<ComplexField>& object_init = std::nullopt,
                    const IterationObserver& observer = {});

/// Applies the convergence rule to a history; exposed for callers that drive sweeps themselves.
bool sse_converged(const std::vector<double>& history, double total_intensity_sq, const EpieConfig& cfg);

/// Union of the probe support over all scan positions.
RealField illuminated_union(const ReconState& state, const ScanPlan& plan);

/// Amplitude, wrapped phase and unwrapped phase of the object inside the illuminated union.
struct Reconstruction {
    RealField amplitude;
    RealField phase_wrapped;
    RealField phase;
    RealField mask;
};

Reconstruction finalize(const ReconState& state, const ScanPlan& plan);

}  // namespace ptycho
