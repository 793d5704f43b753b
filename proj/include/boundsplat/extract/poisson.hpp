#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/math.hpp"
#include "boundsplat/extract/knn.hpp"
#include "boundsplat/extract/points.hpp"

#include <spdlog/spdlog.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/parallel_reduce.h>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace boundsplat::extract {

/// Node-sampled scalar field on a cubic grid. After `solve_indicator` the field is
/// scaled so that its mean over the input points is +-0.5 and `iso` is that value:
/// +0.5 for outward normals, -0.5 (with `inverted`) when the normals point inward.
struct IndicatorGrid {
    int n = 0; // nodes per axis
    Vec3 origin = Vec3::Zero();
    double h = 1.0;
    std::vector<double> values;
    double iso = 0.5;
    bool inverted = false;

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * n + j) * n + i;
    }
    Vec3 node(int i, int j, int k) const { return origin + h * Vec3(i, j, k); }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }

    /// Trilinear interpolation; clamps to the grid.
    double sample(const Vec3& p) const {
        const Vec3 u = (p - origin) / h;
        std::array<int, 3> i0{};
        Vec3 f;
        for (int a = 0; a < 3; ++a) {
            const double c = std::clamp(u[a], 0.0, static_cast<double>(n - 1) - 1e-9);
            i0[a] = static_cast<int>(std::floor(c));
            f[a] = c - i0[a];
        }
        double v = 0.0;
        for (int c = 0; c < 8; ++c) {
            const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
            const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
            v += w * at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
        }
        return v;
    }
};

struct PoissonOptions {
    int resolution = 128;       // nodes per axis on the finest level
    double margin = 0.05;       // fraction of the largest extent added on every side
    double screening = 4.0;     // weight of the point-value term, in units of 1/grid size
    int smoothing_passes = 1;   // [1 2 1] passes over the splatted normal field
    double cg_tolerance = 1e-6; // relative residual
    int cg_max_iterations = 500;
    int coarsest = 32;          // cascadic warm start from this resolution up
};

struct SolveStats {
    int levels = 0;
    int iterations = 0;          // finest level
    double relative_residual = 0.0;
};

namespace detail {

/// Cube enclosing the points with `margin` of the largest extent on every side.
inline IndicatorGrid make_grid(const OrientedPointSet& pts, int n, double margin) {
    Vec3 lo = pts.point(0), hi = lo;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        lo = lo.cwiseMin(pts.point(i));
        hi = hi.cwiseMax(pts.point(i));
    }
    const double size = (hi - lo).maxCoeff() * (1.0 + 2.0 * margin);
    IndicatorGrid g;
    g.n = n;
    g.h = size / (n - 1);
    g.origin = 0.5 * (lo + hi) - Vec3::Constant(0.5 * size);
    g.values.assign(static_cast<std::size_t>(n) * n * n, 0.0);
    return g;
}

/// Surface area represented by each sample: pi r^2 / k with r the distance to the
/// k-th neighbour.
inline std::vector<double> sample_areas(const OrientedPointSet& pts, std::size_t k = 8) {
    const PointIndex index(pts.points);
    std::vector<double> area(pts.size());
    tbb::parallel_for(std::size_t{0}, pts.size(), [&](std::size_t i) {
        const auto nb = index.nearest(pts.point(i), k + 1);
        const double r = nb.back().distance;
        area[i] = std::numbers::pi * r * r / static_cast<double>(k);
    });
    return area;
}

struct Stencil {
    std::array<std::size_t, 8> node;
    std::array<double, 8> weight;
};

inline Stencil trilinear(const IndicatorGrid& g, const Vec3& p) {
    const Vec3 u = (p - g.origin) / g.h;
    std::array<int, 3> i0{};
    Vec3 f;
    for (int a = 0; a < 3; ++a) {
        const double c = std::clamp(u[a], 0.0, static_cast<double>(g.n - 1) - 1e-9);
        i0[a] = static_cast<int>(std::floor(c));
        f[a] = c - i0[a];
    }
    Stencil s;
    for (int c = 0; c < 8; ++c) {
        const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
        s.node[c] = g.index(i0[0] + dx, i0[1] + dy, i0[2] + dz);
        s.weight[c] = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
    }
    return s;
}

/// Staggered vector field: component a lives on the faces between node i and i + e_a,
/// stored at the lower node's index (the last layer along a is unused).
using FaceField = std::array<std::vector<double>, 3>;

/// Splats -area * normal (the indicator gradient of a solid with outward normals)
/// with trilinear weights at face centers, then smooths with [1 2 1] passes.
inline FaceField splat_normals(const IndicatorGrid& g, const OrientedPointSet& pts, const std::vector<double>& area,
                               int passes) {
    const int n = g.n;
    FaceField v;
    const double inv_vol = 1.0 / (g.h * g.h * g.h);
    for (int a = 0; a < 3; ++a) {
        v[a].assign(g.values.size(), 0.0);
        Vec3 shift = Vec3::Zero();
        shift[a] = 0.5 * g.h;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const Vec3 q = pts.point(i) - shift;
            Vec3 u = (q - g.origin) / g.h;
            std::array<int, 3> i0{};
            Vec3 f;
            for (int b = 0; b < 3; ++b) {
                const double hi = static_cast<double>(n - 1) - (b == a ? 1.0 : 0.0) - 1e-9;
                const double c = std::clamp(u[b], 0.0, hi);
                i0[b] = static_cast<int>(std::floor(c));
                f[b] = c - i0[b];
            }
            const double val = -area[i] * pts.normals[3 * i + a] * inv_vol;
            for (int c = 0; c < 8; ++c) {
                const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
                const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
                v[a][g.index(i0[0] + dx, i0[1] + dy, i0[2] + dz)] += w * val;
            }
        }
        for (int pass = 0; pass < passes; ++pass)
            for (int axis = 0; axis < 3; ++axis) {
                const std::size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
                std::vector<double> out(v[a].size(), 0.0);
                tbb::parallel_for(0, n, [&](int k) {
                    for (int j = 0; j < n; ++j)
                        for (int i = 0; i < n; ++i) {
                            const int c = axis == 0 ? i : axis == 1 ? j : k;
                            const std::size_t idx = g.index(i, j, k);
                            double s = 2.0 * v[a][idx];
                            if (c > 0) s += v[a][idx - stride];
                            if (c < n - 1) s += v[a][idx + stride];
                            out[idx] = 0.25 * s;
                        }
                });
                v[a] = std::move(out);
            }
    }
    return v;
}

inline bool is_boundary(const IndicatorGrid& g, std::size_t idx) {
    const int n = g.n;
    const int i = static_cast<int>(idx % n), j = static_cast<int>((idx / n) % n), k = static_cast<int>(idx / (static_cast<std::size_t>(n) * n));
    return i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return tbb::parallel_deterministic_reduce(
        tbb::blocked_range<std::size_t>(0, a.size(), 1 << 14), 0.0,
        [&](const tbb::blocked_range<std::size_t>& r, double acc) {
            for (std::size_t i = r.begin(); i != r.end(); ++i) acc += a[i] * b[i];
            return acc;
        },
        std::plus<>());
}

/// Least-squares system h * L x + alpha * S^T W S x = h^2 G^T v + alpha * S^T W t,
/// with L the 7-point graph Laplacian, G the face difference operator, S trilinear
/// sampling at the points and zero Dirichlet values on the outer node layer.
class ScreenedSystem {
public:
    ScreenedSystem(const IndicatorGrid& g, const OrientedPointSet& pts, const std::vector<double>& area,
                   double alpha, int smoothing_passes)
        : g_(g), alpha_(alpha) {
        stencils_.reserve(pts.size());
        weights_.reserve(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            stencils_.push_back(trilinear(g, pts.point(i)));
            weights_.push_back(area[i] * pts.confidences[i]);
        }
        const FaceField v = splat_normals(g, pts, area, smoothing_passes);
        const int n = g.n;
        rhs_base_.assign(g.values.size(), 0.0);
        const double h2 = g.h * g.h;
        tbb::parallel_for(1, n - 1, [&](int k) {
            for (int j = 1; j < n - 1; ++j)
                for (int i = 1; i < n - 1; ++i) {
                    const std::size_t idx = g.index(i, j, k);
                    // d/dx_node of sum_f (x_b - x_a - h v_f)^2 picks +v on the face below, -v above.
                    const double s = v[0][idx - 1] - v[0][idx] + v[1][idx - n] - v[1][idx] +
                                     v[2][idx - static_cast<std::size_t>(n) * n] - v[2][idx];
                    rhs_base_[idx] = h2 * s;
                }
        });
        diag_.assign(g.values.size(), 6.0 * g.h);
        for (std::size_t p = 0; p < stencils_.size(); ++p)
            for (int c = 0; c < 8; ++c)
                diag_[stencils_[p].node[c]] += alpha_ * weights_[p] * stencils_[p].weight[c] * stencils_[p].weight[c];
    }

    std::vector<double> rhs(double target) const {
        std::vector<double> b = rhs_base_;
        if (alpha_ > 0.0)
            for (std::size_t p = 0; p < stencils_.size(); ++p)
                for (int c = 0; c < 8; ++c) b[stencils_[p].node[c]] += alpha_ * weights_[p] * stencils_[p].weight[c] * target;
        for (std::size_t i = 0; i < b.size(); ++i)
            if (is_boundary(g_, i)) b[i] = 0.0;
        return b;
    }

    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        const int n = g_.n;
        const std::size_t plane = static_cast<std::size_t>(n) * n;
        std::fill(y.begin(), y.end(), 0.0);
        const double h = g_.h;
        tbb::parallel_for(1, n - 1, [&](int k) {
            for (int j = 1; j < n - 1; ++j)
                for (int i = 1; i < n - 1; ++i) {
                    const std::size_t idx = g_.index(i, j, k);
                    y[idx] = h * (6.0 * x[idx] - x[idx - 1] - x[idx + 1] - x[idx - n] - x[idx + n] - x[idx - plane] -
                                  x[idx + plane]);
                }
        });
        if (alpha_ > 0.0)
            for (std::size_t p = 0; p < stencils_.size(); ++p) {
                const Stencil& s = stencils_[p];
                double v = 0.0;
                for (int c = 0; c < 8; ++c) v += s.weight[c] * x[s.node[c]];
                v *= alpha_ * weights_[p];
                for (int c = 0; c < 8; ++c)
                    if (!is_boundary(g_, s.node[c])) y[s.node[c]] += s.weight[c] * v;
            }
    }

    const std::vector<double>& diagonal() const { return diag_; }

    double mean_at_points(const std::vector<double>& x) const {
        double sum = 0.0;
        for (const Stencil& s : stencils_)
            for (int c = 0; c < 8; ++c) sum += s.weight[c] * x[s.node[c]];
        return sum / static_cast<double>(stencils_.size());
    }

private:
    const IndicatorGrid& g_;
    double alpha_;
    std::vector<Stencil> stencils_;
    std::vector<double> weights_;
    std::vector<double> rhs_base_;
    std::vector<double> diag_;
};

/// Jacobi-preconditioned CG; boundary entries of x stay at their initial values.
inline std::pair<int, double> pcg(const ScreenedSystem& sys, const std::vector<double>& b, std::vector<double>& x,
                                  double tol, int max_iter) {
    const std::size_t n = x.size();
    std::vector<double> r(n), z(n), p(n), q(n);
    sys.apply(x, q);
    const auto& d = sys.diagonal();
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = b[i] - q[i];
        z[i] = r[i] / d[i];
    }
    p = z;
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) return {0, 0.0};
    double rz = dot(r, z);
    double rel = std::sqrt(dot(r, r)) / bnorm;
    int it = 0;
    for (; it < max_iter && rel > tol; ++it) {
        sys.apply(p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) break;
        const double step = rz / pq;
        tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 1 << 14), [&](const auto& range) {
            for (std::size_t i = range.begin(); i != range.end(); ++i) {
                x[i] += step * p[i];
                r[i] -= step * q[i];
                z[i] = r[i] / d[i];
            }
        });
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 1 << 14), [&](const auto& range) {
            for (std::size_t i = range.begin(); i != range.end(); ++i) p[i] = z[i] + beta * p[i];
        });
        rel = std::sqrt(dot(r, r)) / bnorm;
    }
    return {it, rel};
}

} // namespace detail

/// Smoothed indicator of the solid bounded by the oriented points: a screened
/// least-squares fit of the field gradient to the splatted normals, solved
/// coarse-to-fine with each level warm-started from the previous one.
inline IndicatorGrid solve_indicator(const OrientedPointSet& pts, const PoissonOptions& opt = {},
                                     SolveStats* stats = nullptr) {
    check_point_set(pts);
    if (opt.resolution < 8) throw ValidationError("grid resolution must be at least 8");
    const std::vector<double> area = detail::sample_areas(pts);

    std::vector<int> levels{opt.resolution};
    while (levels.back() / 2 >= std::max(opt.coarsest, 8)) levels.push_back(levels.back() / 2);
    std::reverse(levels.begin(), levels.end());

    IndicatorGrid prev;
    double target = 0.0;
    SolveStats st;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        IndicatorGrid g = detail::make_grid(pts, levels[l], opt.margin);
        const double size = g.h * (g.n - 1);
        const double alpha = opt.screening / size;
        if (l == 0) {
            // The unscreened solve fixes orientation and scale for the screening target.
            detail::ScreenedSystem plain(g, pts, area, 0.0, opt.smoothing_passes);
            detail::pcg(plain, plain.rhs(0.0), g.values, opt.cg_tolerance, opt.cg_max_iterations);
            target = plain.mean_at_points(g.values);
        } else {
            for (int k = 1; k < g.n - 1; ++k)
                for (int j = 1; j < g.n - 1; ++j)
                    for (int i = 1; i < g.n - 1; ++i) g.values[g.index(i, j, k)] = prev.sample(g.node(i, j, k));
        }
        detail::ScreenedSystem sys(g, pts, area, alpha, opt.smoothing_passes);
        const auto [it, rel] = detail::pcg(sys, sys.rhs(target), g.values, opt.cg_tolerance, opt.cg_max_iterations);
        st.iterations = it;
        st.relative_residual = rel;
        target = sys.mean_at_points(g.values);
        spdlog::debug("indicator level {}^3: {} CG iterations, residual {:.2e}", g.n, it, rel);
        prev = std::move(g);
    }
    st.levels = static_cast<int>(levels.size());
    if (!(std::abs(target) > 0.0) || !std::isfinite(target))
        throw NumericError("indicator solve produced a flat field (normals may cancel out)");
    const double scale = 0.5 / std::abs(target);
    for (double& v : prev.values) v *= scale;
    prev.inverted = target < 0.0;
    prev.iso = prev.inverted ? -0.5 : 0.5;
    if (stats) *stats = st;
    return prev;
}

} // namespace boundsplat::extract
