#pragma once

#include "boundsplat/core/bound.hpp"
#include "boundsplat/core/camera.hpp"
#include "boundsplat/core/types.hpp"
#include "boundsplat/raster/backward.hpp"
#include "boundsplat/raster/composite.hpp"
#include "boundsplat/raster/project.hpp"

namespace boundsplat::raster {

inline RenderTarget render(const GaussianCloud3D& cloud, const CameraPose& cam, const RasterSettings& rs = {}) {
    const FragmentSet fs = project(cloud, cam, rs);
    return composite(fs, bin_fragments(fs, cam, rs.tile_size), cam, rs);
}

inline RenderTarget render(const SurfelCloud2D& surfels, const CameraPose& cam, const RasterSettings& rs = {}) {
    const FragmentSet fs = project(surfels, cam, rs);
    return composite(fs, bin_fragments(fs, cam, rs.tile_size), cam, rs);
}

/// A bound asset renders as the free cloud it realizes; both go through the same path.
inline RenderTarget render(const BoundAsset& asset, const CameraPose& cam, const RasterSettings& rs = {}) {
    return render(realize_cloud(asset), cam, rs);
}

inline CloudGradients render_backward(const GaussianCloud3D& cloud, const CameraPose& cam, const Image& d_color,
                                      const RasterSettings& rs = {}) {
    const FragmentSet fs = project(cloud, cam, rs);
    const TileGrid grid = bin_fragments(fs, cam, rs.tile_size);
    return project_backward(cloud, fs, composite_backward(fs, grid, cam, d_color, rs), cam);
}

inline SurfelGradients render_backward(const SurfelCloud2D& surfels, const CameraPose& cam, const Image& d_color,
                                       const RasterSettings& rs = {}) {
    const FragmentSet fs = project(surfels, cam, rs);
    const TileGrid grid = bin_fragments(fs, cam, rs.tile_size);
    return project_backward(surfels, fs, composite_backward(fs, grid, cam, d_color, rs));
}

struct BoundGradients {
    std::vector<double> vertices;
    std::vector<double> colors;
    std::vector<double> opacity_logits;
    std::vector<double> rotations2d;
    std::vector<double> log_scales;
};

/// Pulls free-cloud gradients back onto the bound parameterization. Centers are
/// linear in the vertices; rotations depend on them through the triangle frame.
inline BoundGradients bound_backward(const BoundAsset& asset, const CloudGradients& g) {
    BoundGradients out;
    out.vertices.assign(asset.mesh.vertices.size(), 0.0);
    out.colors = g.colors;
    out.opacity_logits = g.opacity_logits;
    out.log_scales = g.log_scales;
    out.rotations2d.assign(2 * asset.size(), 0.0);
    const std::size_t n = asset.per_triangle;
    for (std::size_t t = 0; t < asset.cluster_count(); ++t) {
        const auto& tri = asset.mesh.triangles[t];
        const Vec3 a = asset.mesh.vertex(tri[0]), b = asset.mesh.vertex(tri[1]), c = asset.mesh.vertex(tri[2]);
        const auto frame = triangle_frame(a, b, c);
        Mat3 g_frame = Mat3::Zero();
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = t * n + k;
            const Vec3 w = asset.weights(k);
            const Vec3 gp = row<3>(g.positions, i);
            for (int j = 0; j < 3; ++j) row<3>(out.vertices, tri[j]) += w[j] * gp;
            if (!frame) continue;
            // R = F * Rz(cos, sin)
            const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> g_r(g.rotation_matrices.data() + 9 * i);
            const Vec2 cs_raw = row<2>(asset.rotations2d, i);
            const Mat3 rz = in_plane_rotation(cs_raw);
            g_frame += g_r * rz.transpose();
            const Mat3 g_rz = frame->transpose() * g_r;
            const Vec2 g_cs(g_rz(0, 0) + g_rz(1, 1), -g_rz(0, 1) + g_rz(1, 0));
            row<2>(out.rotations2d, i) += normalize_backward(cs_raw, g_cs);
        }
        if (!frame) continue;
        // F = (e1, n x e1, n), e1 = normalize(b - a), n = normalize((b - a) x (c - a))
        const Vec3 e1 = frame->col(0), nrm = frame->col(2);
        Vec3 g_e1 = g_frame.col(0) + g_frame.col(1).cross(nrm);
        Vec3 g_n = g_frame.col(2) + e1.cross(g_frame.col(1));
        const Vec3 e = b - a, p = c - a;
        const Vec3 cr = e.cross(p);
        const Vec3 g_e_unit = normalize_backward(e, g_e1);
        const Vec3 g_cr = normalize_backward(cr, g_n);
        const Vec3 g_e = g_e_unit + p.cross(g_cr);
        const Vec3 g_p = g_cr.cross(e);
        row<3>(out.vertices, tri[1]) += g_e;
        row<3>(out.vertices, tri[0]) -= g_e + g_p;
        row<3>(out.vertices, tri[2]) += g_p;
    }
    detail::require_finite_grad(out.vertices, "vertices");
    detail::require_finite_grad(out.rotations2d, "rotations");
    return out;
}

inline BoundGradients render_backward(const BoundAsset& asset, const CameraPose& cam, const Image& d_color,
                                      const RasterSettings& rs = {}) {
    return bound_backward(asset, render_backward(realize_cloud(asset), cam, d_color, rs));
}

} // namespace boundsplat::raster
