#include "ptycho/stitch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ptycho {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Box {
    int r0, c0, r1, c1;  // half-open

    int rows() const { return r1 - r0; }
    int cols() const { return c1 - c0; }
    bool contains(int r, int c) const { return r >= r0 && r < r1 && c >= c0 && c < c1; }
};

Box box_of(const PatchPrediction& p) {
    return {p.origin.row, p.origin.col, p.origin.row + static_cast<int>(p.support_mask.rows()),
            p.origin.col + static_cast<int>(p.support_mask.cols())};
}

bool covers(const PatchPrediction& p, int r, int c) {
    const Box b = box_of(p);
    return b.contains(r, c) && p.support_mask(r - b.r0, c - b.c0) != 0.0;
}

// 1D squared Euclidean distance transform (lower envelope of parabolas).
// Non-seed samples carry kFar, which stays finite so the arithmetic is exact.
constexpr double kFar = 1e20;

void distance_1d(std::vector<double>& f) {
    const int n = static_cast<int>(f.size());
    std::vector<double> d(n);
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = (q - v[k]) * double(q - v[k]) + f[v[k]];
    }
    f = std::move(d);
}

// Euclidean distance from every pixel of `box` to the nearest seed.
std::vector<double> distance_to(const std::vector<std::pair<int, int>>& seeds, const Box& box) {
    const int rows = box.rows(), cols = box.cols();
    std::vector<double> grid(static_cast<std::size_t>(rows) * cols, kFar);
    for (auto [r, c] : seeds)
        if (box.contains(r, c)) grid[(r - box.r0) * cols + (c - box.c0)] = 0.0;
    std::vector<double> line;
    for (int c = 0; c < cols; ++c) {
        line.assign(rows, 0.0);
        for (int r = 0; r < rows; ++r) line[r] = grid[r * cols + c];
        distance_1d(line);
        for (int r = 0; r < rows; ++r) grid[r * cols + c] = line[r];
    }
    for (int r = 0; r < rows; ++r) {
        line.assign(grid.begin() + r * cols, grid.begin() + (r + 1) * cols);
        distance_1d(line);
        std::copy(line.begin(), line.end(), grid.begin() + r * cols);
    }
    for (auto& g : grid) g = std::sqrt(g);
    return grid;
}

// Edge pixels of `self` whose 4-neighbour outside `self` lies inside `other`.
std::vector<std::pair<int, int>> edge_inside(const PatchPrediction& self, const PatchPrediction& other) {
    std::vector<std::pair<int, int>> seeds;
    const Box b = box_of(self);
    static constexpr int dr[] = {-1, 1, 0, 0};
    static constexpr int dc[] = {0, 0, -1, 1};
    for (int r = b.r0; r < b.r1; ++r) {
        for (int c = b.c0; c < b.c1; ++c) {
            if (!covers(self, r, c)) continue;
            for (int k = 0; k < 4; ++k) {
                const int nr = r + dr[k], nc = c + dc[k];
                if (!covers(self, nr, nc) && covers(other, nr, nc)) {
                    seeds.emplace_back(r, c);
                    break;
                }
            }
        }
    }
    return seeds;
}

Box intersect(const Box& a, const Box& b) {
    return {std::max(a.r0, b.r0), std::max(a.c0, b.c0), std::min(a.r1, b.r1), std::min(a.c1, b.c1)};
}

Box hull(const Box& a, const Box& b) {
    return {std::min(a.r0, b.r0), std::min(a.c0, b.c0), std::max(a.r1, b.r1), std::max(a.c1, b.c1)};
}

}  // namespace

void StitchConfig::validate() const {
    if (taper_width && *taper_width < 1) throw Error(ErrorCode::InvalidConfig, "taper_width must be >= 1");
}

PatchPrediction crop_patch(const PatchPrediction& patch, const StitchConfig& cfg) {
    cfg.validate();
    require_same_shape(patch.amplitude, patch.phase, "patch planes differ in shape");
    require_same_shape(patch.amplitude, patch.support_mask, "patch planes differ in shape");
    const long rows = static_cast<long>(patch.support_mask.rows());
    const long cols = static_cast<long>(patch.support_mask.cols());
    const long m = static_cast<long>(cfg.crop_margin);

    // Square erosion, separable into a row pass and a column pass.
    RealField horizontal(patch.support_mask.shape());
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            bool keep = c - m >= 0 && c + m < cols;
            for (long k = c - m; keep && k <= c + m; ++k) keep = patch.support_mask(r, k) != 0.0;
            horizontal(r, c) = keep ? 1.0 : 0.0;
        }
    }
    RealField eroded(patch.support_mask.shape());
    long r_lo = rows, r_hi = -1, c_lo = cols, c_hi = -1;
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            bool keep = r - m >= 0 && r + m < rows;
            for (long k = r - m; keep && k <= r + m; ++k) keep = horizontal(k, c) != 0.0;
            if (!keep) continue;
            eroded(r, c) = 1.0;
            r_lo = std::min(r_lo, r);
            r_hi = std::max(r_hi, r);
            c_lo = std::min(c_lo, c);
            c_hi = std::max(c_hi, c);
        }
    }
    if (r_hi < 0) throw Error(ErrorCode::EmptyAfterCrop, "no support remains after cropping");

    const Offset at{static_cast<int>(r_lo), static_cast<int>(c_lo)};
    const Shape shape{static_cast<std::size_t>(r_hi - r_lo + 1), static_cast<std::size_t>(c_hi - c_lo + 1)};
    PatchPrediction out{crop(patch.amplitude, at, shape), crop(patch.phase, at, shape), crop(eroded, at, shape),
                        {patch.origin.row + at.row, patch.origin.col + at.col}};
    for (std::size_t i = 0; i < out.support_mask.size(); ++i) {
        if (out.support_mask[i] == 0.0) out.amplitude[i] = out.phase[i] = 0.0;
    }
    return out;
}

std::vector<RealField> feather_weights(const std::vector<PatchPrediction>& patches, Shape canvas,
                                       const StitchConfig& cfg) {
    cfg.validate();
    const Box canvas_box{0, 0, static_cast<int>(canvas.rows), static_cast<int>(canvas.cols)};
    for (const auto& p : patches) {
        const Box b = box_of(p);
        if (b.r0 < 0 || b.c0 < 0 || b.r1 > canvas_box.r1 || b.c1 > canvas_box.c1) {
            throw Error(ErrorCode::NoCoverage, "canvas is smaller than the patch extents");
        }
    }

    // Unnormalized taper products, one plane per patch.
    std::vector<RealField> taper;
    taper.reserve(patches.size());
    for (const auto& p : patches) {
        RealField t(p.support_mask.shape());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = p.support_mask[i] != 0.0 ? 1.0 : 0.0;
        taper.push_back(std::move(t));
    }

    for (std::size_t i = 0; i < patches.size(); ++i) {
        for (std::size_t k = i + 1; k < patches.size(); ++k) {
            const Box bi = box_of(patches[i]), bk = box_of(patches[k]);
            const Box common = intersect(bi, bk);
            if (common.rows() <= 0 || common.cols() <= 0) continue;
            bool overlap = false;
            for (int r = common.r0; r < common.r1 && !overlap; ++r)
                for (int c = common.c0; c < common.c1 && !overlap; ++c)
                    overlap = covers(patches[i], r, c) && covers(patches[k], r, c);
            if (!overlap) continue;

            const Box frame = hull(bi, bk);
            const auto seeds_i = edge_inside(patches[i], patches[k]);
            const auto seeds_k = edge_inside(patches[k], patches[i]);
            const auto dist_i = seeds_i.empty() ? std::vector<double>() : distance_to(seeds_i, frame);
            const auto dist_k = seeds_k.empty() ? std::vector<double>() : distance_to(seeds_k, frame);

            for (int r = common.r0; r < common.r1; ++r) {
                for (int c = common.c0; c < common.c1; ++c) {
                    if (!covers(patches[i], r, c) || !covers(patches[k], r, c)) continue;
                    const std::size_t f = static_cast<std::size_t>((r - frame.r0) * frame.cols() + (c - frame.c0));
                    const double di = dist_i.empty() ? kInf : dist_i[f];
                    const double dk = dist_k.empty() ? kInf : dist_k[f];
                    double ri = 1.0, rk = 1.0;
                    if (cfg.taper_width) {
                        const double width = static_cast<double>(*cfg.taper_width);
                        ri = std::min(1.0, (di + 0.5) / width);
                        rk = std::min(1.0, (dk + 0.5) / width);
                    } else if (std::isfinite(di) && std::isfinite(dk)) {
                        ri = (di + 0.5) / (di + dk + 1.0);
                        rk = (dk + 0.5) / (di + dk + 1.0);
                    }
                    taper[i](r - bi.r0, c - bi.c0) *= ri;
                    taper[k](r - bk.r0, c - bk.c0) *= rk;
                }
            }
        }
    }

    RealField total(canvas);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const Box b = box_of(patches[i]);
        for (int r = b.r0; r < b.r1; ++r)
            for (int c = b.c0; c < b.c1; ++c) total(r, c) += taper[i](r - b.r0, c - b.c0);
    }
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const Box b = box_of(patches[i]);
        for (int r = b.r0; r < b.r1; ++r) {
            for (int c = b.c0; c < b.c1; ++c) {
                double& w = taper[i](r - b.r0, c - b.c0);
                w = w > 0.0 ? w / total(r, c) : 0.0;
            }
        }
    }
    return taper;
}

StitchResult stitch(const std::vector<PatchPrediction>& patches, Shape canvas, const StitchConfig& cfg) {
    if (patches.empty()) throw Error(ErrorCode::NoCoverage, "no patches to stitch");
    std::vector<PatchPrediction> cropped;
    cropped.reserve(patches.size());
    for (const auto& p : patches) cropped.push_back(crop_patch(p, cfg));
    const auto weights = feather_weights(cropped, canvas, cfg);

    StitchResult out{RealField(canvas), RealField(canvas), RealField(canvas)};
    for (std::size_t i = 0; i < cropped.size(); ++i) {
        const auto& p = cropped[i];
        for (std::size_t r = 0; r < p.support_mask.rows(); ++r) {
            for (std::size_t c = 0; c < p.support_mask.cols(); ++c) {
                const double w = weights[i](r, c);
                if (w == 0.0) continue;
                const std::size_t cr = p.origin.row + r, cc = p.origin.col + c;
                out.amplitude(cr, cc) += w * p.amplitude(r, c);
                out.phase(cr, cc) += w * p.phase(r, c);
                out.coverage(cr, cc) += w;
            }
        }
    }
    return out;
}

}  // namespace ptycho
