#include "ptycho/unwrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

namespace ptycho {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Edge {
    std::size_t a;
    std::size_t b;
    double reliability;
};

// Border pixels and pixels with any unmasked neighbour are least reliable.
RealField reliability_map(const RealField& phase, const RealField& mask) {
    const std::size_t rows = phase.rows(), cols = phase.cols();
    RealField rel(phase.shape(), 0.0);
    for (std::size_t r = 1; r + 1 < rows; ++r) {
        for (std::size_t c = 1; c + 1 < cols; ++c) {
            bool interior = true;
            for (int dr = -1; dr <= 1 && interior; ++dr)
                for (int dc = -1; dc <= 1 && interior; ++dc) interior = mask(r + dr, c + dc) != 0.0;
            if (!interior) continue;
            const double p = phase(r, c);
            const auto second = [&](double before, double after) {
                return wrap_to_pi(before - p) - wrap_to_pi(p - after);
            };
            const double h = second(phase(r, c - 1), phase(r, c + 1));
            const double v = second(phase(r - 1, c), phase(r + 1, c));
            const double d1 = second(phase(r - 1, c - 1), phase(r + 1, c + 1));
            const double d2 = second(phase(r - 1, c + 1), phase(r + 1, c - 1));
            const double d = std::sqrt(h * h + v * v + d1 * d1 + d2 * d2);
            rel(r, c) = d > 0.0 ? 1.0 / d : std::numeric_limits<double>::max() / 4.0;
        }
    }
    return rel;
}

}  // namespace

double wrap_to_pi(double value) {
    double w = std::remainder(value, kTwoPi);
    if (w <= -std::numbers::pi) w += kTwoPi;
    return w;
}

RealField unwrap_phase(const RealField& wrapped, const RealField& mask) {
    require_same_shape(wrapped, mask, "phase and mask differ in shape");
    const std::size_t rows = wrapped.rows(), cols = wrapped.cols();
    const RealField rel = reliability_map(wrapped, mask);

    std::vector<Edge> edges;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (mask(r, c) == 0.0) continue;
            const std::size_t i = r * cols + c;
            if (c + 1 < cols && mask(r, c + 1) != 0.0) edges.push_back({i, i + 1, rel[i] + rel[i + 1]});
            if (r + 1 < rows && mask(r + 1, c) != 0.0) edges.push_back({i, i + cols, rel[i] + rel[i + cols]});
        }
    }
    std::stable_sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.reliability > y.reliability; });

    std::vector<std::size_t> group(wrapped.size());
    std::iota(group.begin(), group.end(), 0);
    std::vector<std::vector<std::size_t>> members(wrapped.size());
    for (std::size_t i = 0; i < wrapped.size(); ++i)
        if (mask[i] != 0.0) members[i] = {i};
    std::vector<double> unwrapped(wrapped.begin(), wrapped.end());

    for (const auto& e : edges) {
        std::size_t ga = group[e.a], gb = group[e.b];
        if (ga == gb) continue;
        // Shift the smaller group by the multiple of 2π that best matches the pair.
        const double jump = std::round((unwrapped[e.b] - unwrapped[e.a]) / kTwoPi) * kTwoPi;
        double shift = -jump;
        if (members[ga].size() > members[gb].size() || (members[ga].size() == members[gb].size() && ga < gb)) {
            // gb moves
        } else {
            std::swap(ga, gb);
            shift = jump;
        }
        for (auto m : members[gb]) {
            unwrapped[m] += shift;
            group[m] = ga;
        }
        members[ga].insert(members[ga].end(), members[gb].begin(), members[gb].end());
        members[gb].clear();
        members[gb].shrink_to_fit();
    }

    // Each connected group is shifted so its mean lies in (-π, π].
    std::vector<double> group_sum(wrapped.size(), 0.0);
    for (std::size_t i = 0; i < wrapped.size(); ++i)
        if (mask[i] != 0.0) group_sum[group[i]] += unwrapped[i];
    for (std::size_t g = 0; g < wrapped.size(); ++g) {
        if (members[g].empty()) continue;
        const double mean = group_sum[g] / static_cast<double>(members[g].size());
        const double shift = -std::round(mean / kTwoPi) * kTwoPi;
        if (shift != 0.0)
            for (auto m : members[g]) unwrapped[m] += shift;
    }

    RealField out(wrapped.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] != 0.0 ? unwrapped[i] : 0.0;
    return out;
}

}  // namespace ptycho
