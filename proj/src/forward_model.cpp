#include "ptycho/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "ptycho/fft.hpp"

namespace ptycho {
namespace {

// Alternative layouts keep the default 20 px spacing per 128 px of window.
std::size_t scaled_spacing(std::size_t window) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(20.0 * window / kDefaultWindow)));
}

ScanPlan plan_from_positions(std::vector<Offset> positions, std::size_t window, std::string kind) {
    int min_r = positions.front().row, min_c = positions.front().col;
    int max_r = min_r, max_c = min_c;
    for (const auto& p : positions) {
        min_r = std::min(min_r, p.row);
        min_c = std::min(min_c, p.col);
        max_r = std::max(max_r, p.row);
        max_c = std::max(max_c, p.col);
    }
    for (auto& p : positions) {
        p.row -= min_r;
        p.col -= min_c;
    }
    ScanPlan plan;
    plan.positions = std::move(positions);
    plan.window = window;
    plan.canvas = {window + static_cast<std::size_t>(max_r - min_r), window + static_cast<std::size_t>(max_c - min_c)};
    plan.kind = std::move(kind);
    plan.validate();
    return plan;
}


}  // namespace

RealField Probe::support() const {
    RealField s(field.shape());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::abs(field[i]) > 0.0 ? 1.0 : 0.0;
    return s;
}

Probe make_disc_probe(std::size_t window, double radius, double edge_smooth, double phase_curvature) {
    if (window == 0 || !(radius > 0.0) || radius > window / 2.0) {
        throw Error(ErrorCode::RangeViolation, "probe radius must lie in (0, window/2]");
    }
    if (!(edge_smooth >= 0.0) || !std::isfinite(phase_curvature)) {
        throw Error(ErrorCode::RangeViolation, "edge_smooth must be >= 0 and phase_curvature finite");
    }
    Probe probe{{window, radius, edge_smooth, phase_curvature}, ComplexField(window, window)};
    const double center = static_cast<double>(window / 2);
    const double flat = radius - edge_smooth;
    for (std::size_t r = 0; r < window; ++r) {
        for (std::size_t c = 0; c < window; ++c) {
            const double dist = std::hypot(r - center, c - center);
            double amp = 0.0;
            if (dist >= radius) {
                continue;
            } else if (dist <= flat) {
                amp = 1.0;
            } else {
                amp = 0.5 * (1.0 + std::cos(std::numbers::pi * (dist - flat) / edge_smooth));
            }
            if (amp > 0.0) {
                const double rho = dist / radius;
                probe.field(r, c) = std::polar(amp, phase_curvature * rho * rho);
            }
        }
    }
    return probe;
}

Probe make_default_probe(std::size_t window) {
    const double scale = static_cast<double>(window) / kDefaultWindow;
    return make_disc_probe(window, kDefaultRadius * scale, kDefaultEdgeSmooth * scale, kDefaultPhaseCurvature);
}

void ScanPlan::validate() const {
    std::set<Offset> seen;
    for (const auto& p : positions) {
        if (p.row < 0 || p.col < 0 || p.row + window > canvas.rows || p.col + window > canvas.cols) {
            throw Error(ErrorCode::PlanOutOfBounds, "probe window leaves the canvas");
        }
        if (!seen.insert(p).second) {
            throw Error(ErrorCode::RangeViolation, "duplicate scan position");
        }
    }
}

ScanPlan make_grid_plan(std::size_t rows, std::size_t cols, std::size_t offset, std::size_t window) {
    if (rows < 1 || cols < 1 || offset < 1 || window < 1) {
        throw Error(ErrorCode::RangeViolation, "grid plan needs rows, cols, offset, window >= 1");
    }
    ScanPlan plan;
    plan.window = window;
    plan.canvas = {window + (rows - 1) * offset, window + (cols - 1) * offset};
    plan.kind = "grid";
    plan.grid = GridLayout{rows, cols, offset};
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            plan.positions.push_back({static_cast<int>(r * offset), static_cast<int>(c * offset)});
        }
    }
    return plan;
}

AltLayout parse_alt_layout(std::string_view name) {
    if (name == "diamond") return AltLayout::Diamond;
    if (name == "parallelogram") return AltLayout::Parallelogram;
    if (name == "random") return AltLayout::Random;
    if (name == "count5") return AltLayout::Count5;
    if (name == "count6") return AltLayout::Count6;
    if (name == "count7") return AltLayout::Count7;
    if (name == "count8") return AltLayout::Count8;
    throw Error(ErrorCode::InvalidConfig, "unknown scan layout '" + std::string(name) + "'");
}

std::string_view to_string(AltLayout layout) {
    switch (layout) {
        case AltLayout::Diamond: return "diamond";
        case AltLayout::Parallelogram: return "parallelogram";
        case AltLayout::Random: return "random";
        case AltLayout::Count5: return "count5";
        case AltLayout::Count6: return "count6";
        case AltLayout::Count7: return "count7";
        case AltLayout::Count8: return "count8";
    }
    return "unknown";
}

ScanPlan make_alt_plan(AltLayout kind, std::size_t window, std::uint64_t seed) {
    const int d = static_cast<int>(scaled_spacing(window));
    const int half = std::max(1, d / 2);
    std::vector<Offset> pos;
    switch (kind) {
        case AltLayout::Diamond: {
            // 3×3 lattice rotated by 45°, nearest-neighbour spacing ≈ d.
            const int h = std::max(1, static_cast<int>(std::lround(d / std::numbers::sqrt2)));
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) pos.push_back({(i + j) * h, (i - j + 2) * h});
            break;
        }
        case AltLayout::Parallelogram:
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) pos.push_back({i * d, j * d + i * half});
            break;
        case AltLayout::Random: {
            const Probe probe = make_default_probe(window);
            const int jitter = std::max(1, d / 3);
            std::mt19937_64 rng(seed);
            for (;;) {
                pos.clear();
                for (int i = 0; i < 3; ++i) {
                    for (int j = 0; j < 3; ++j) {
                        const int dr = static_cast<int>(rng() % (2 * jitter + 1)) - jitter;
                        const int dc = static_cast<int>(rng() % (2 * jitter + 1)) - jitter;
                        pos.push_back({i * d + dr, j * d + dc});
                    }
                }
                bool ok = std::set<Offset>(pos.begin(), pos.end()).size() == pos.size();
                for (std::size_t a = 0; ok && a < pos.size(); ++a)
                    for (std::size_t b = a + 1; ok && b < pos.size(); ++b)
                        ok = support_overlap_pixels(probe, pos[a], pos[b]) > 0;
                if (ok) break;
            }
            break;
        }
        case AltLayout::Count5:
            pos = {{0, d}, {d, 0}, {d, d}, {d, 2 * d}, {2 * d, d}};
            break;
        case AltLayout::Count6:
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 3; ++j) pos.push_back({i * d, j * d});
            break;
        case AltLayout::Count7:
            pos = {{0, half}, {0, half + d}, {d, 0}, {d, d}, {d, 2 * d}, {2 * d, half}, {2 * d, half + d}};
            break;
        case AltLayout::Count8:
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    if (i != 1 || j != 1) pos.push_back({i * d, j * d});
            break;
    }
    return plan_from_positions(std::move(pos), window, std::string(to_string(kind)));
}

std::size_t support_overlap_pixels(const Probe& probe, Offset a, Offset b) {
    const std::size_t w = probe.window();
    const int dr = a.row - b.row;
    const int dc = a.col - b.col;
    std::size_t count = 0;
    for (std::size_t r = 0; r < w; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            if (std::abs(probe.field(r, c)) == 0.0) continue;
            const long rb = static_cast<long>(r) + dr;
            const long cb = static_cast<long>(c) + dc;
            if (rb < 0 || cb < 0 || rb >= static_cast<long>(w) || cb >= static_cast<long>(w)) continue;
            if (std::abs(probe.field(rb, cb)) > 0.0) ++count;
        }
    }
    return count;
}

double overlap_percent(std::size_t offset, const Probe& probe) {
    const auto total = support_overlap_pixels(probe, {0, 0}, {0, 0});
    if (total == 0) throw Error(ErrorCode::ZeroProbe, "probe has empty support");
    const auto shared = support_overlap_pixels(probe, {0, 0}, {0, static_cast<int>(offset)});
    return 100.0 * static_cast<double>(shared) / static_cast<double>(total);
}

DiffractionStack simulate_stack(const ComplexField& transmission, const Probe& probe, const ScanPlan& plan) {
    if (transmission.shape() != plan.canvas) {
        throw Error(ErrorCode::ShapeMismatch, "transmission does not match the plan canvas");
    }
    if (probe.window() != plan.window || probe.field.rows() != plan.window) {
        throw Error(ErrorCode::ShapeMismatch, "probe window does not match the plan window");
    }
    plan.validate();

    DiffractionStack stack{plan, {}};
    stack.patterns.reserve(plan.positions.size());
    const Shape win{plan.window, plan.window};
    for (const auto& pos : plan.positions) {
        ComplexField exit_wave = crop(transmission, pos, win);
        for (std::size_t i = 0; i < exit_wave.size(); ++i) exit_wave[i] *= probe.field[i];
        const ComplexField spectrum = dft2(exit_wave);
        RealField intensity(win);
        for (std::size_t i = 0; i < spectrum.size(); ++i) intensity[i] = std::norm(spectrum[i]);
        stack.patterns.push_back(std::move(intensity));
    }
    return stack;
}

RealField union_support(Shape canvas, const Probe& probe, const std::vector<Offset>& positions) {
    RealField mask(canvas);
    const std::size_t w = probe.window();
    for (const auto& pos : positions) {
        if (pos.row < 0 || pos.col < 0 || pos.row + w > canvas.rows || pos.col + w > canvas.cols) {
            throw Error(ErrorCode::PlanOutOfBounds, "probe window leaves the canvas");
        }
        for (std::size_t r = 0; r < w; ++r)
            for (std::size_t c = 0; c < w; ++c)
                if (std::abs(probe.field(r, c)) > 0.0) mask(pos.row + r, pos.col + c) = 1.0;
    }
    return mask;
}

InputSet assemble_input_set(const DiffractionStack& stack, const Probe& probe, const std::vector<std::size_t>& group) {
    if (group.empty() || group.size() > kMaxSetChannels) {
        throw Error(ErrorCode::IndexOutOfRange, "an input set holds between 1 and 9 patterns");
    }
    for (auto idx : group) {
        if (idx >= stack.patterns.size() || idx >= stack.plan.positions.size()) {
            throw Error(ErrorCode::IndexOutOfRange, "scan index " + std::to_string(idx) + " is out of range");
        }
    }
    const std::size_t w = stack.plan.window;
    Offset lo = stack.plan.positions[group.front()];
    Offset hi = lo;
    for (auto idx : group) {
        const auto& p = stack.plan.positions[idx];
        lo = {std::min(lo.row, p.row), std::min(lo.col, p.col)};
        hi = {std::max(hi.row, p.row), std::max(hi.col, p.col)};
    }
    const Shape canvas{w + static_cast<std::size_t>(hi.row - lo.row), w + static_cast<std::size_t>(hi.col - lo.col)};

    InputSet set{group, lo, {}, {}, RealField(canvas)};
    for (auto idx : group) {
        const auto& p = stack.plan.positions[idx];
        const Offset rel{p.row - lo.row, p.col - lo.col};
        RealField channel(canvas);
        paste(channel, stack.patterns[idx], rel);
        set.placements.push_back(rel);
        set.channels.push_back(std::move(channel));
    }
    set.support_mask = union_support(canvas, probe, set.placements);
    return set;
}

std::vector<std::vector<std::size_t>> partition_into_sets(const ScanPlan& plan) {
    std::vector<std::vector<std::size_t>> groups;
    const std::size_t n = plan.positions.size();
    if (plan.grid && plan.grid->rows * plan.grid->cols == n) {
        const auto starts = [](std::size_t extent) {
            std::vector<std::size_t> s;
            if (extent <= 3) return std::vector<std::size_t>{0};
            for (std::size_t i = 0; i < extent; i += 3) s.push_back(std::min(i, extent - 3));
            s.erase(std::unique(s.begin(), s.end()), s.end());
            return s;
        };
        const std::size_t rows = plan.grid->rows, cols = plan.grid->cols;
        for (auto r0 : starts(rows)) {
            for (auto c0 : starts(cols)) {
                std::vector<std::size_t> g;
                for (std::size_t r = r0; r < std::min(rows, r0 + 3); ++r)
                    for (std::size_t c = c0; c < std::min(cols, c0 + 3); ++c) g.push_back(r * cols + c);
                groups.push_back(std::move(g));
            }
        }
        return groups;
    }
    for (std::size_t i = 0; i < n; i += kMaxSetChannels) {
        std::vector<std::size_t> g;
        for (std::size_t j = i; j < std::min(n, i + kMaxSetChannels); ++j) g.push_back(j);
        groups.push_back(std::move(g));
    }
    return groups;
}

MaskedLabel make_masked_label(const ComplexField& transmission, const Probe& probe, const std::vector<Offset>& positions) {
    RealField mask = union_support(transmission.shape(), probe, positions);
    auto [amplitude, phase] = split_transmission(transmission);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] == 0.0) {
            amplitude[i] = 0.0;
            phase[i] = 0.0;
        }
    }
    return {std::move(amplitude), std::move(phase), std::move(mask)};
}

}  // namespace ptycho
