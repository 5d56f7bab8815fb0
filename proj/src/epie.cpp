#include "ptycho/epie.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ptycho/fft.hpp"
#include "ptycho/unwrap.hpp"

namespace ptycho {
namespace {

void check_shapes(const ReconState& state, const DiffractionStack& stack) {
    const auto& plan = stack.plan;
    if (state.object.shape() != plan.canvas) throw Error(ErrorCode::ShapeMismatch, "object does not match the canvas");
    const Shape win{plan.window, plan.window};
    if (state.probe.shape() != win || state.probe_support.shape() != win) {
        throw Error(ErrorCode::ShapeMismatch, "probe does not match the scan window");
    }
    if (stack.patterns.size() != plan.positions.size()) {
        throw Error(ErrorCode::ShapeMismatch, "pattern count differs from scan position count");
    }
    for (const auto& p : stack.patterns) {
        if (p.shape() != win) throw Error(ErrorCode::ShapeMismatch, "pattern does not match the scan window");
    }
}

std::vector<std::size_t> sweep_order(std::size_t n, const EpieConfig& cfg, std::size_t iteration) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (cfg.scan_order == ScanOrder::Shuffled) {
        std::mt19937_64 rng(cfg.shuffle_seed + 0x9E3779B97F4A7C15ULL * (iteration + 1));
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    }
    return order;
}

double total_intensity_sq(const DiffractionStack& stack) {
    double total = 0.0;
    for (const auto& p : stack.patterns)
        for (double v : p) total += v * v;
    return total;
}

/// Reusable buffers and FFT-native (uncentered) measurements for one dataset.
class Sweeper {
public:
    explicit Sweeper(const DiffractionStack& stack)
        : stack_(stack),
          window_{stack.plan.window, stack.plan.window},
          fft_(window_),
          object_window_(window_),
          exit_wave_(window_),
          spectrum_(window_) {
        intensity_.reserve(stack.patterns.size());
        modulus_.reserve(stack.patterns.size());
        for (const auto& p : stack.patterns) {
            RealField native = ifftshift(p);
            RealField modulus(window_);
            for (std::size_t i = 0; i < native.size(); ++i) modulus[i] = std::sqrt(std::max(native[i], 0.0));
            intensity_.push_back(std::move(native));
            modulus_.push_back(std::move(modulus));
        }
    }

    void sweep(ReconState& state, const EpieConfig& cfg) {
        const auto order = sweep_order(stack_.plan.positions.size(), cfg, state.iteration);
        double error = 0.0;
        for (auto j : order) error += update_position(state, cfg, j);
        ++state.iteration;
        state.sse_history.push_back(error);
    }

private:
    // Returns this position's contribution to the SSE, measured before the update.
    double update_position(ReconState& state, const EpieConfig& cfg, std::size_t j) {
        const Offset pos = stack_.plan.positions[j];
        const std::size_t w = window_.rows;
        const std::size_t n = window_.size();
        auto& object = state.object;
        auto& probe = state.probe;
        const auto& support = state.probe_support;

        for (std::size_t r = 0; r < w; ++r)
            for (std::size_t c = 0; c < w; ++c) object_window_(r, c) = object(pos.row + r, pos.col + c);

        for (std::size_t i = 0; i < n; ++i) {
            exit_wave_[i] = support[i] != 0.0 ? object_window_[i] * probe[i] : Complex{};
            spectrum_[i] = exit_wave_[i];
        }
        fft_.forward(spectrum_.values());

        // Fourier modulus replacement; Ψ/|Ψ| is taken as 0 where |Ψ| = 0.
        double error = 0.0;
        const auto& measured = intensity_[j];
        const auto& modulus = modulus_[j];
        for (std::size_t i = 0; i < n; ++i) {
            const double power = std::norm(spectrum_[i]);
            const double residual = measured[i] - power;
            error += residual * residual;
            spectrum_[i] = power > 0.0 ? spectrum_[i] * (modulus[i] / std::sqrt(power)) : Complex{};
        }
        fft_.backward(spectrum_.values());
        const double inv_n = 1.0 / static_cast<double>(n);
        // spectrum_ now holds ψ_upd; turn it into ψ_upd - ψ.
        for (std::size_t i = 0; i < n; ++i) spectrum_[i] = spectrum_[i] * inv_n - exit_wave_[i];

        double max_probe = 0.0;
        for (const auto& p : probe) max_probe = std::max(max_probe, std::norm(p));
        if (max_probe == 0.0) throw Error(ErrorCode::ZeroProbe, "probe estimate is identically zero");

        double max_object = 0.0;
        if (cfg.update_probe) {
            for (const auto& t : object_window_) max_object = std::max(max_object, std::norm(t));
            if (max_object == 0.0) throw Error(ErrorCode::ZeroObjectWindow, "object window is identically zero");
        }

        const double object_step = cfg.alpha / max_probe;
        for (std::size_t r = 0; r < w; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                const std::size_t i = r * w + c;
                if (support[i] == 0.0) continue;
                object(pos.row + r, pos.col + c) = object_window_[i] + object_step * std::conj(probe[i]) * spectrum_[i];
            }
        }
        if (cfg.update_probe) {
            const double probe_step = cfg.beta / max_object;
            for (std::size_t i = 0; i < n; ++i) probe[i] += probe_step * std::conj(object_window_[i]) * spectrum_[i];
        }
        return error;
    }

    const DiffractionStack& stack_;
    Shape window_;
    FftPlan2d fft_;
    std::vector<RealField> intensity_;
    std::vector<RealField> modulus_;
    ComplexField object_window_;
    ComplexField exit_wave_;
    ComplexField spectrum_;
};

}  // namespace

void EpieConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw Error(ErrorCode::InvalidConfig, "alpha must lie in (0, 2]");
    if (!(beta > 0.0 && beta <= 2.0)) throw Error(ErrorCode::InvalidConfig, "beta must lie in (0, 2]");
    if (max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "max_iterations must be >= 1");
    if (!(sse_rel_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "sse_rel_tol must be > 0");
    if (!(sse_abs_tol >= 0.0)) throw Error(ErrorCode::InvalidConfig, "sse_abs_tol must be >= 0");
}

ReconState init_state(const ScanPlan& plan, const Probe& probe_estimate, const std::optional<ComplexField>& object_init) {
    if (probe_estimate.field.shape() != Shape{plan.window, plan.window}) {
        throw Error(ErrorCode::ShapeMismatch, "probe does not match the scan window");
    }
    ReconState state{ComplexField(plan.canvas, Complex{1.0, 0.0}), probe_estimate.field, probe_estimate.support(), 0, {}};
    if (object_init) {
        if (object_init->shape() != plan.canvas) throw Error(ErrorCode::ShapeMismatch, "object init does not match the canvas");
        state.object = *object_init;
    }
    return state;
}

ReconState epie_iteration(ReconState state, const DiffractionStack& stack, const EpieConfig& cfg) {
    cfg.validate();
    check_shapes(state, stack);
    Sweeper(stack).sweep(state, cfg);
    return state;
}

double sse(const DiffractionStack& stack, const ReconState& state) {
    check_shapes(state, stack);
    const Shape win{stack.plan.window, stack.plan.window};
    double total = 0.0;
    for (std::size_t j = 0; j < stack.plan.positions.size(); ++j) {
        ComplexField exit_wave = crop(state.object, stack.plan.positions[j], win);
        for (std::size_t i = 0; i < exit_wave.size(); ++i) {
            exit_wave[i] = state.probe_support[i] != 0.0 ? exit_wave[i] * state.probe[i] : Complex{};
        }
        const ComplexField spectrum = dft2(exit_wave);
        for (std::size_t i = 0; i < spectrum.size(); ++i) {
            const double residual = stack.patterns[j][i] - std::norm(spectrum[i]);
            total += residual * residual;
        }
    }
    return total;
}

bool sse_converged(const std::vector<double>& history, double total_intensity_sq, const EpieConfig& cfg) {
    if (history.empty()) return false;
    const double current = history.back();
    if (total_intensity_sq > 0.0 && current / total_intensity_sq < cfg.sse_abs_tol) return true;
    if (total_intensity_sq == 0.0 && current == 0.0) return true;
    if (history.size() < 2) return false;
    const double previous = history[history.size() - 2];
    if (previous == 0.0) return current == 0.0;
    return std::abs(current - previous) / previous < cfg.sse_rel_tol;
}

EpieResult run_epie(const DiffractionStack& stack, const Probe& probe_estimate, const EpieConfig& cfg,
                    const std::optional<ComplexField>& object_init, const IterationObserver& observer) {
    cfg.validate();
    EpieResult result{init_state(stack.plan, probe_estimate, object_init), false};
    check_shapes(result.state, stack);
    const double reference = total_intensity_sq(stack);
    Sweeper sweeper(stack);
    while (result.state.iteration < cfg.max_iterations) {
        sweeper.sweep(result.state, cfg);
        if (observer) observer(result.state.iteration, result.state.sse_history.back());
        if (sse_converged(result.state.sse_history, reference, cfg)) {
            result.converged = true;
            break;
        }
    }
    return result;
}

RealField illuminated_union(const ReconState& state, const ScanPlan& plan) {
    RealField mask(plan.canvas);
    for (const auto& pos : plan.positions)
        for (std::size_t r = 0; r < plan.window; ++r)
            for (std::size_t c = 0; c < plan.window; ++c)
                if (state.probe_support(r, c) != 0.0) mask(pos.row + r, pos.col + c) = 1.0;
    return mask;
}

Reconstruction finalize(const ReconState& state, const ScanPlan& plan) {
    RealField mask = illuminated_union(state, plan);
    auto [amplitude, wrapped] = split_transmission(state.object);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] == 0.0) amplitude[i] = wrapped[i] = 0.0;
    }
    RealField unwrapped = unwrap_phase(wrapped, mask);
    return {std::move(amplitude), std::move(wrapped), std::move(unwrapped), std::move(mask)};
}

}  // namespace ptycho
