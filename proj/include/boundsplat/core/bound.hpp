#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/math.hpp"
#include "boundsplat/core/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace boundsplat {

/// Shared barycentric templates for N in {1, 3, 6}.
inline std::vector<double> barycentric_template(std::size_t n) {
    switch (n) {
    case 1:
        return {1.0 / 3, 1.0 / 3, 1.0 / 3};
    case 3:
        return {4.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 4.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 4.0 / 6};
    case 6:
        return {4.0 / 6,  1.0 / 6,  1.0 / 6,  1.0 / 6,  4.0 / 6,  1.0 / 6,  1.0 / 6,  1.0 / 6, 4.0 / 6,
                5.0 / 12, 5.0 / 12, 2.0 / 12, 2.0 / 12, 5.0 / 12, 5.0 / 12, 5.0 / 12, 2.0 / 12, 5.0 / 12};
    default:
        throw ValidationError("Gaussians per triangle must be 1, 3 or 6 (got " + std::to_string(n) + ")");
    }
}

inline Vec3 blend(const Vec3& w, const Vec3& a, const Vec3& b, const Vec3& c) {
    return w[0] * a + w[1] * b + w[2] * c;
}

/// Gaussian centers on an arbitrary vertex set sharing the asset's topology.
inline std::vector<double> realize_bound_positions(const BoundAsset& asset, std::span<const double> vertices) {
    const std::size_t n = asset.per_triangle;
    std::vector<double> out(3 * asset.size());
    auto vtx = [&](std::uint32_t i) { return Vec3(vertices[3 * i], vertices[3 * i + 1], vertices[3 * i + 2]); };
    for (std::size_t t = 0; t < asset.cluster_count(); ++t) {
        const auto& tri = asset.mesh.triangles[t];
        const Vec3 a = vtx(tri[0]), b = vtx(tri[1]), c = vtx(tri[2]);
        for (std::size_t k = 0; k < n; ++k) row<3>(out, t * n + k) = blend(asset.weights(k), a, b, c);
    }
    return out;
}

inline std::vector<double> realize_bound_positions(const BoundAsset& asset) {
    return realize_bound_positions(asset, asset.mesh.vertices);
}

/// Mesh-blended colors when `from_mesh`, otherwise the directly optimized colors.
inline std::vector<double> realize_bound_colors(const BoundAsset& asset, bool from_mesh) {
    if (!from_mesh) return asset.colors;
    if (!asset.mesh.has_colors()) throw ValidationError("realize_bound_colors: mesh has no vertex colors");
    const std::size_t n = asset.per_triangle;
    std::vector<double> out(3 * asset.size());
    for (std::size_t t = 0; t < asset.cluster_count(); ++t) {
        const auto& tri = asset.mesh.triangles[t];
        const Vec3 a = asset.mesh.color(tri[0]), b = asset.mesh.color(tri[1]), c = asset.mesh.color(tri[2]);
        for (std::size_t k = 0; k < n; ++k) row<3>(out, t * n + k) = blend(asset.weights(k), a, b, c);
    }
    return out;
}

/// Triangle tangent frame with columns (first edge, in-plane perpendicular, face normal).
/// Empty when the triangle has collapsed.
inline std::optional<Mat3> triangle_frame(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 e = b - a;
    const Vec3 cr = e.cross(c - a);
    const double el = e.norm(), cl = cr.norm();
    if (!(el > 1e-14) || !(cl > 1e-14 * el * (c - a).norm()) || !(cl > 0.0)) return std::nullopt;
    Mat3 f;
    f.col(0) = e / el;
    f.col(2) = cr / cl;
    f.col(1) = f.col(2).cross(f.col(0));
    return f;
}

/// In-plane rotation about the frame normal by the normalized (cos, sin) pair.
inline Mat3 in_plane_rotation(const Vec2& cs_raw) {
    const Vec2 cs = cs_raw.normalized();
    Mat3 r = Mat3::Identity();
    r(0, 0) = cs[0];
    r(0, 1) = -cs[1];
    r(1, 0) = cs[1];
    r(1, 1) = cs[0];
    return r;
}

inline double mean_edge_length(const Vec3& a, const Vec3& b, const Vec3& c) {
    return ((b - a).norm() + (c - b).norm() + (a - c).norm()) / 3.0;
}

/// Free-cloud view of a bound asset posed on `vertices` (the asset's own vertices
/// or a deformation frame). Rotations are the host triangle frame composed with
/// the learned in-plane rotation. A collapsed triangle keeps the rotation given in
/// `previous` (same layout as the output's rotations) or identity when absent.
inline GaussianCloud3D realize_cloud(const BoundAsset& asset, std::span<const double> vertices,
                                     const std::vector<double>* previous = nullptr) {
    if (vertices.size() != asset.mesh.vertices.size())
        throw ValidationError("realize_cloud: frame has " + std::to_string(vertices.size() / 3) +
                              " vertices, asset has " + std::to_string(asset.mesh.vertex_count()));
    GaussianCloud3D cloud;
    cloud.positions = realize_bound_positions(asset, vertices);
    cloud.colors = asset.colors;
    cloud.opacity_logits = asset.opacity_logits;
    cloud.log_scales = asset.log_scales;
    cloud.rotations.assign(4 * asset.size(), 0.0);
    const std::size_t n = asset.per_triangle;
    auto vtx = [&](std::uint32_t i) { return Vec3(vertices[3 * i], vertices[3 * i + 1], vertices[3 * i + 2]); };
    for (std::size_t t = 0; t < asset.cluster_count(); ++t) {
        const auto& tri = asset.mesh.triangles[t];
        const auto frame = triangle_frame(vtx(tri[0]), vtx(tri[1]), vtx(tri[2]));
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t g = t * n + k;
            if (frame) {
                row<4>(cloud.rotations, g) = rotation_to_quat(*frame * in_plane_rotation(row<2>(asset.rotations2d, g)));
            } else if (previous != nullptr && previous->size() == cloud.rotations.size()) {
                row<4>(cloud.rotations, g) = row<4>(*previous, g);
            } else {
                cloud.rotations[4 * g] = 1.0;
            }
        }
    }
    return cloud;
}

inline GaussianCloud3D realize_cloud(const BoundAsset& asset) { return realize_cloud(asset, asset.mesh.vertices); }

/// Covariance of a surfel in world space. The third axis has zero extent.
inline Mat3 surfel_to_covariance(const Vec4& rotation, const Vec2& scale) {
    if (!rotation.allFinite() || !scale.allFinite())
        throw NumericError("surfel_to_covariance: non-finite input");
    const Mat3 r = quat_to_rotation(rotation.normalized());
    const Vec3 s2(scale[0] * scale[0], scale[1] * scale[1], 0.0);
    return r * s2.asDiagonal() * r.transpose();
}

/// A surfel taken from one 3D Gaussian: the smallest scale axis is dropped and
/// becomes the normal.
struct FlattenedSurfel {
    Vec3 position;
    Vec2 scale;
    Vec4 rotation; // (w, x, y, z); third column = dropped axis
};

inline FlattenedSurfel flatten_gaussian(const Vec3& position, const Vec3& scale, const Vec4& rotation) {
    if (!position.allFinite() || !scale.allFinite() || !rotation.allFinite())
        throw NumericError("flatten_gaussian: non-finite input");
    const Mat3 r = quat_to_rotation(rotation.normalized());
    int drop = 0;
    scale.minCoeff(&drop);
    const int a = (drop + 1) % 3, b = (drop + 2) % 3;
    Mat3 frame;
    frame.col(0) = r.col(a);
    frame.col(1) = r.col(b);
    frame.col(2) = r.col(drop);
    // (a, b, drop) is a cyclic permutation, so the frame stays right-handed.
    return {position, Vec2(scale[a], scale[b]), rotation_to_quat(frame)};
}

} // namespace boundsplat
