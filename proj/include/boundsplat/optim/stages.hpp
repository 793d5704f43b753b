#pragma once

#include "boundsplat/bind/bind.hpp"
#include "boundsplat/core/primitives.hpp"
#include "boundsplat/extract/extract.hpp"
#include "boundsplat/extract/knn.hpp"
#include "boundsplat/optim/trainer.hpp"

#include <spdlog/spdlog.h>

namespace boundsplat::optim {

/// Surfels seeded on the vertices of a coarse mesh: oriented by the vertex normal,
/// sized from the mean distance to the three nearest other vertices.
inline SurfelCloud2D init_surfels(const ColoredMesh& mesh, const StageConfig& cfg) {
    validate_mesh(mesh, false);
    const std::size_t n = mesh.vertex_count();
    if (n < 4) throw ValidationError("init_surfels: mesh needs at least 4 vertices");
    const std::vector<double> normals = vertex_normals(mesh);
    const extract::PointIndex index(mesh.vertices);

    SurfelCloud2D c;
    c.resize(n);
    c.positions = mesh.vertices;
    c.colors = mesh.has_colors() ? mesh.colors : std::vector<double>(3 * n, 0.5);
    for (std::size_t i = 0; i < n; ++i) {
        const auto nn = index.nearest(mesh.vertex(i), 4); // includes the vertex itself
        double d = 0.0;
        int k = 0;
        for (const auto& m : nn)
            if (m.index != i && k < 3) {
                d += m.distance;
                ++k;
            }
        d = k > 0 ? d / k : 1e-2;
        const double s = std::log(std::max(cfg.init_scale_factor * d, 1e-4));
        c.log_scales[2 * i] = c.log_scales[2 * i + 1] = std::min(s, cfg.max_log_scale);
        c.opacity_logits[i] = logit(cfg.init_opacity);

        Vec3 z = row<3>(normals, i);
        if (!(z.norm() > 0.0)) z = Vec3::UnitZ();
        z.normalize();
        const Vec3 helper = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
        const Vec3 x = helper.cross(z).normalized();
        Mat3 r;
        r.col(0) = x;
        r.col(1) = z.cross(x);
        r.col(2) = z;
        row<4>(c.rotations, i) = rotation_to_quat(r);
    }
    c.validate();
    return c;
}

struct Stage1Result {
    SurfelCloud2D surfels;
    extract::Surface surface;
    std::vector<LogRow> log;
};

inline Stage1Result run_stage1(const ColoredMesh& init, const StageConfig& cfg, const guidance::GuidanceSource& source,
                               RunOptions opt = {}, const extract::ExtractOptions& ext = {}) {
    cfg.validate();
    SurfelModel model(init_surfels(init, cfg), cfg);
    opt.prune = true;
    Stage1Result r;
    r.log = train(model, cfg, source, 1, std::move(opt)).log;
    spdlog::info("stage 1: {} surfels after optimization; extracting mesh", model.size());
    r.surface = extract::extract_mesh(model.cloud, ext);
    r.surfels = std::move(model.cloud);
    return r;
}

struct Stage2Result {
    BindingMode mode = BindingMode::Bound;
    BoundAsset asset;           // bound and frozen-position modes
    GaussianCloud3D free_cloud; // free mode
    std::vector<LogRow> log;

    GaussianCloud3D cloud() const { return mode == BindingMode::Free ? free_cloud : realize_cloud(asset); }
};

inline BoundAsset initial_asset(const ColoredMesh& mesh, const StageConfig& cfg) {
    bind::BindOptions b;
    b.per_triangle = cfg.per_triangle;
    return bind::build_bound_asset(mesh, b);
}

/// Stage 2 in any binding mode. The free mode starts from the same Gaussians the
/// bound mode would start from, released from the mesh.
inline Stage2Result run_stage2(const ColoredMesh& mesh, const StageConfig& cfg,
                               const guidance::GuidanceSource& source, RunOptions opt = {}) {
    cfg.validate();
    opt.prune = false;
    Stage2Result r;
    r.mode = cfg.binding;
    BoundAsset asset = initial_asset(mesh, cfg);
    if (cfg.binding == BindingMode::Free) {
        FreeModel model(realize_cloud(asset), cfg);
        r.log = train(model, cfg, source, 2, std::move(opt)).log;
        r.free_cloud = std::move(model.cloud);
    } else {
        BoundModel model(std::move(asset), cfg);
        r.log = train(model, cfg, source, 2, std::move(opt)).log;
        r.asset = std::move(model.asset);
    }
    return r;
}

} // namespace boundsplat::optim
