#pragma once

#include "boundsplat/core/types.hpp"
#include "boundsplat/extract/color.hpp"
#include "boundsplat/extract/decimate.hpp"
#include "boundsplat/extract/isosurface.hpp"
#include "boundsplat/extract/points.hpp"
#include "boundsplat/extract/poisson.hpp"

#include <spdlog/spdlog.h>

namespace boundsplat::extract {

struct ExtractOptions {
    PoissonOptions poisson;
    double prune_threshold = 0.05;
    std::size_t target_triangles = 20000; // 0 disables decimation
    ColorOptions color;
};

struct Surface {
    ColoredMesh mesh; // uncolored
    bool inverted = false;
    SolveStats stats;
};

/// Oriented points -> closed triangle mesh (largest component, decimated to budget).
inline Surface reconstruct_surface(const OrientedPointSet& pts, const ExtractOptions& opt = {}) {
    Surface out;
    const IndicatorGrid grid = solve_indicator(pts, opt.poisson, &out.stats);
    out.inverted = grid.inverted;
    if (grid.inverted) spdlog::warn("indicator field is inside-out: point normals face inward");
    ColoredMesh mesh = marching_tetrahedra(grid);
    if (mesh.triangles.empty()) throw NumericError("isosurface is empty");
    mesh = largest_component(mesh);
    if (opt.target_triangles > 0) mesh = decimate(mesh, opt.target_triangles);
    out.mesh = std::move(mesh);
    return out;
}

/// Surfel cloud -> colored mesh.
inline Surface extract_mesh(const SurfelCloud2D& surfels, const ExtractOptions& opt = {}) {
    surfels.validate();
    const OrientedPointSet pts = points_from_surfels(surfels, opt.prune_threshold);
    Surface s = reconstruct_surface(pts, opt);
    s.mesh.colors = color_vertices(s.mesh.vertices, surfels, opt.color);
    return s;
}

} // namespace boundsplat::extract
