#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/math.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace boundsplat {

/// Per-element properties carried through from a file without interpretation
/// (e.g. higher-order SH coefficients in a splat PLY). Kept so that a load/save
/// cycle does not drop data other tools rely on.
struct OpaqueProperties {
    std::vector<std::string> names;
    std::vector<std::string> types;  // PLY scalar type names
    std::size_t stride = 0;          // bytes per element
    std::vector<std::uint8_t> bytes; // element-major

    bool empty() const { return names.empty(); }

    void keep(const std::vector<bool>& mask) {
        if (empty()) return;
        std::vector<std::uint8_t> out;
        out.reserve(bytes.size());
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) out.insert(out.end(), bytes.begin() + i * stride, bytes.begin() + (i + 1) * stride);
        bytes = std::move(out);
    }
};

namespace detail {
template <int Stride>
void keep_rows(std::vector<double>& v, const std::vector<bool>& mask) {
    std::size_t dst = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        for (int k = 0; k < Stride; ++k) v[dst * Stride + k] = v[i * Stride + k];
        ++dst;
    }
    v.resize(dst * Stride);
}

inline void require_finite(const std::vector<double>& v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i])) throw NumericError(std::string(what) + ": non-finite value at index " + std::to_string(i));
}
} // namespace detail

/// Free 3D Gaussians. Opacities live in logit space and scales in log space so the
/// optimizer works on unconstrained values; colors are raw and clamped only when rendered.
struct GaussianCloud3D {
    std::vector<double> positions;      // xyz
    std::vector<double> colors;         // rgb
    std::vector<double> opacity_logits; // 1
    std::vector<double> log_scales;     // 3
    std::vector<double> rotations;      // unit quaternion (w, x, y, z)
    OpaqueProperties extras;

    std::size_t size() const { return opacity_logits.size(); }
    bool empty() const { return size() == 0; }

    void resize(std::size_t n) {
        positions.resize(3 * n, 0.0);
        colors.resize(3 * n, 0.5);
        opacity_logits.resize(n, 0.0);
        log_scales.resize(3 * n, 0.0);
        rotations.resize(4 * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (row<4>(rotations, i).norm() == 0.0) rotations[4 * i] = 1.0;
    }

    Vec3 position(std::size_t i) const { return row<3>(positions, i); }
    Vec3 color(std::size_t i) const { return row<3>(colors, i); }
    double opacity(std::size_t i) const { return sigmoid(opacity_logits[i]); }
    Vec3 scale(std::size_t i) const { return row<3>(log_scales, i).array().exp(); }
    Vec4 quaternion(std::size_t i) const { return row<4>(rotations, i); }

    void renormalize() {
        for (std::size_t i = 0; i < size(); ++i) {
            auto q = row<4>(rotations, i);
            const double n = q.norm();
            if (n > 0.0) q /= n;
        }
    }

    void keep(const std::vector<bool>& mask) {
        detail::keep_rows<3>(positions, mask);
        detail::keep_rows<3>(colors, mask);
        detail::keep_rows<1>(opacity_logits, mask);
        detail::keep_rows<3>(log_scales, mask);
        detail::keep_rows<4>(rotations, mask);
        extras.keep(mask);
    }

    void validate() const {
        const std::size_t n = size();
        if (positions.size() != 3 * n || colors.size() != 3 * n || log_scales.size() != 3 * n ||
            rotations.size() != 4 * n)
            throw ValidationError("GaussianCloud3D: inconsistent array sizes");
        detail::require_finite(positions, "GaussianCloud3D positions");
        detail::require_finite(colors, "GaussianCloud3D colors");
        detail::require_finite(opacity_logits, "GaussianCloud3D opacities");
        detail::require_finite(log_scales, "GaussianCloud3D scales");
        detail::require_finite(rotations, "GaussianCloud3D rotations");
        for (std::size_t i = 0; i < n; ++i)
            if (row<4>(rotations, i).norm() < 1e-12)
                throw ValidationError("GaussianCloud3D: zero quaternion at index " + std::to_string(i));
        if (!extras.empty() && extras.bytes.size() != extras.stride * n)
            throw ValidationError("GaussianCloud3D: extra properties do not match element count");
    }
};

/// Surfels: Gaussians flattened to a disk. The rotation's third column is the normal.
struct SurfelCloud2D {
    std::vector<double> positions;      // xyz
    std::vector<double> colors;         // rgb
    std::vector<double> opacity_logits; // 1
    std::vector<double> log_scales;     // (s_u, s_v)
    std::vector<double> rotations;      // unit quaternion (w, x, y, z)

    std::size_t size() const { return opacity_logits.size(); }
    bool empty() const { return size() == 0; }

    void resize(std::size_t n) {
        positions.resize(3 * n, 0.0);
        colors.resize(3 * n, 0.5);
        opacity_logits.resize(n, 0.0);
        log_scales.resize(2 * n, 0.0);
        rotations.resize(4 * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (row<4>(rotations, i).norm() == 0.0) rotations[4 * i] = 1.0;
    }

    Vec3 position(std::size_t i) const { return row<3>(positions, i); }
    Vec3 color(std::size_t i) const { return row<3>(colors, i); }
    double opacity(std::size_t i) const { return sigmoid(opacity_logits[i]); }
    Vec2 scale(std::size_t i) const { return row<2>(log_scales, i).array().exp(); }
    Vec4 quaternion(std::size_t i) const { return row<4>(rotations, i); }
    Vec3 normal(std::size_t i) const { return quat_to_rotation(quaternion(i).normalized()).col(2); }

    void renormalize() {
        for (std::size_t i = 0; i < size(); ++i) {
            auto q = row<4>(rotations, i);
            const double n = q.norm();
            if (n > 0.0) q /= n;
        }
    }

    void keep(const std::vector<bool>& mask) {
        detail::keep_rows<3>(positions, mask);
        detail::keep_rows<3>(colors, mask);
        detail::keep_rows<1>(opacity_logits, mask);
        detail::keep_rows<2>(log_scales, mask);
        detail::keep_rows<4>(rotations, mask);
    }

    void validate() const {
        const std::size_t n = size();
        if (positions.size() != 3 * n || colors.size() != 3 * n || log_scales.size() != 2 * n ||
            rotations.size() != 4 * n)
            throw ValidationError("SurfelCloud2D: inconsistent array sizes");
        detail::require_finite(positions, "SurfelCloud2D positions");
        detail::require_finite(colors, "SurfelCloud2D colors");
        detail::require_finite(opacity_logits, "SurfelCloud2D opacities");
        detail::require_finite(log_scales, "SurfelCloud2D scales");
        detail::require_finite(rotations, "SurfelCloud2D rotations");
        for (std::size_t i = 0; i < n; ++i)
            if (row<4>(rotations, i).norm() < 1e-12)
                throw ValidationError("SurfelCloud2D: zero quaternion at index " + std::to_string(i));
    }
};

using Triangle = std::array<std::uint32_t, 3>;

struct ColoredMesh {
    std::vector<double> vertices; // xyz
    std::vector<double> colors;   // rgb in [0, 1]
    std::vector<Triangle> triangles;

    std::size_t vertex_count() const { return vertices.size() / 3; }
    std::size_t triangle_count() const { return triangles.size(); }
    Vec3 vertex(std::size_t i) const { return row<3>(vertices, i); }
    Vec3 color(std::size_t i) const { return row<3>(colors, i); }
    bool has_colors() const { return colors.size() == vertices.size() && !colors.empty(); }
};

struct MeshReport {
    std::size_t degenerate_triangles = 0;
    std::size_t non_manifold_edges = 0;
    std::size_t boundary_edges = 0;
    std::vector<bool> degenerate; // per triangle
};

/// Diagonal of the vertex bounding box; 0 for an empty mesh.
inline double bounding_diagonal(const std::vector<double>& xyz) {
    if (xyz.empty()) return 0.0;
    Vec3 lo = row<3>(xyz, 0), hi = lo;
    for (std::size_t i = 1; i < xyz.size() / 3; ++i) {
        lo = lo.cwiseMin(Vec3(row<3>(xyz, i)));
        hi = hi.cwiseMax(Vec3(row<3>(xyz, i)));
    }
    return (hi - lo).norm();
}

/// Area threshold after normalizing the mesh to a unit bounding box.
inline constexpr double kDegenerateArea = 1e-12;

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

/// Structural checks that never throw: degenerate faces and edge manifoldness.
inline MeshReport inspect_mesh(const ColoredMesh& mesh) {
    MeshReport report;
    report.degenerate.assign(mesh.triangle_count(), false);
    double extent = 0.0;
    {
        // Largest bounding box side; normalizing by it maps the mesh into a unit box.
        if (!mesh.vertices.empty()) {
            Vec3 lo = mesh.vertex(0), hi = lo;
            for (std::size_t i = 1; i < mesh.vertex_count(); ++i) {
                lo = lo.cwiseMin(mesh.vertex(i));
                hi = hi.cwiseMax(mesh.vertex(i));
            }
            extent = (hi - lo).maxCoeff();
        }
    }
    const double area_scale = extent > 0.0 ? 1.0 / (extent * extent) : 1.0;
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_use;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double area = triangle_area(mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2]));
        if (!(area * area_scale > kDegenerateArea) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            report.degenerate[t] = true;
            ++report.degenerate_triangles;
        }
        for (int k = 0; k < 3; ++k) {
            std::uint32_t a = tri[k], b = tri[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            ++edge_use[{a, b}];
        }
    }
    for (const auto& [edge, count] : edge_use) {
        if (count > 2) ++report.non_manifold_edges;
        if (count == 1) ++report.boundary_edges;
    }
    return report;
}

/// Throws on out-of-range indices, non-finite data, missing colors or degenerate
/// faces. Non-manifold edges are allowed but logged.
inline MeshReport validate_mesh(const ColoredMesh& mesh, bool allow_degenerate = false) {
    if (mesh.vertices.size() % 3 != 0) throw ValidationError("ColoredMesh: vertex array is not a multiple of 3");
    if (!mesh.colors.empty() && mesh.colors.size() != mesh.vertices.size())
        throw ValidationError("ColoredMesh: color count does not match vertex count");
    detail::require_finite(mesh.vertices, "ColoredMesh vertices");
    detail::require_finite(mesh.colors, "ColoredMesh colors");
    const std::size_t nv = mesh.vertex_count();
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
        for (std::uint32_t idx : mesh.triangles[t])
            if (idx >= nv)
                throw ValidationError("ColoredMesh: triangle " + std::to_string(t) + " references vertex " +
                                      std::to_string(idx) + " but the mesh has " + std::to_string(nv));
    MeshReport report = inspect_mesh(mesh);
    if (report.degenerate_triangles > 0 && !allow_degenerate)
        throw ValidationError("ColoredMesh: " + std::to_string(report.degenerate_triangles) + " degenerate triangle(s)");
    if (report.non_manifold_edges > 0)
        spdlog::warn("mesh has {} non-manifold edge(s)", report.non_manifold_edges);
    return report;
}

/// Mesh-bound Gaussians: V clusters (one per triangle) of N Gaussians whose centers
/// are convex combinations of their host triangle's vertices with a frozen,
/// shared weight template.
struct BoundAsset {
    ColoredMesh mesh;
    std::size_t per_triangle = 3;          // N
    std::vector<double> template_weights;  // N x 3, each row convex
    std::vector<double> colors;            // V*N x 3
    std::vector<double> opacity_logits;    // V*N
    std::vector<double> rotations2d;       // V*N x 2, (cos, sin) of the in-plane angle
    std::vector<double> log_scales;        // V*N x 3

    std::size_t cluster_count() const { return mesh.triangle_count(); }
    std::size_t size() const { return cluster_count() * per_triangle; }
    std::size_t host_triangle(std::size_t gaussian) const { return gaussian / per_triangle; }
    Vec3 weights(std::size_t k) const { return row<3>(template_weights, k); }

    void renormalize() {
        for (std::size_t i = 0; i < size(); ++i) {
            auto r = row<2>(rotations2d, i);
            const double n = r.norm();
            if (n > 0.0) r /= n;
        }
    }

    void validate() const {
        const std::size_t n = size();
        if (per_triangle == 0) throw ValidationError("BoundAsset: N must be positive");
        if (template_weights.size() != 3 * per_triangle)
            throw ValidationError("BoundAsset: weight template must hold N triples");
        for (std::size_t k = 0; k < per_triangle; ++k) {
            const Vec3 w = weights(k);
            if (w.minCoeff() < 0.0 || std::abs(w.sum() - 1.0) > 1e-6)
                throw ValidationError("BoundAsset: barycentric weight triple " + std::to_string(k) + " is not convex");
        }
        if (colors.size() != 3 * n || opacity_logits.size() != n || rotations2d.size() != 2 * n ||
            log_scales.size() != 3 * n)
            throw ValidationError("BoundAsset: per-Gaussian arrays must have V*N rows");
        detail::require_finite(colors, "BoundAsset colors");
        detail::require_finite(opacity_logits, "BoundAsset opacities");
        detail::require_finite(rotations2d, "BoundAsset rotations");
        detail::require_finite(log_scales, "BoundAsset scales");
        validate_mesh(mesh, true);
    }
};

} // namespace boundsplat
