#pragma once

#include "boundsplat/core/bound.hpp"
#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/math.hpp"
#include "boundsplat/core/types.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace boundsplat::bind {

struct BindOptions {
    std::size_t per_triangle = 3;
    double opacity = 0.9;
    double scale_factor = 0.5;  // in-plane scale relative to the host's mean edge length
    double normal_factor = 0.1; // third axis relative to the mean edge length
};

/// Clusters of N Gaussians on every non-degenerate triangle. Degenerate triangles
/// are dropped (with a warning); more than half degenerate is an error.
inline BoundAsset build_bound_asset(const ColoredMesh& mesh, const BindOptions& opt = {}) {
    const MeshReport report = validate_mesh(mesh, true);
    if (mesh.triangle_count() == 0) throw ValidationError("build_bound_asset: mesh has no triangles");
    if (2 * report.degenerate_triangles > mesh.triangle_count())
        throw ValidationError("build_bound_asset: " + std::to_string(report.degenerate_triangles) + " of " +
                              std::to_string(mesh.triangle_count()) + " triangles are degenerate");
    if (report.degenerate_triangles > 0)
        spdlog::warn("build_bound_asset: dropping {} degenerate triangle(s)", report.degenerate_triangles);
    if (!(opt.opacity > 0.0 && opt.opacity < 1.0)) throw ValidationError("build_bound_asset: opacity must be in (0, 1)");

    BoundAsset a;
    a.mesh.vertices = mesh.vertices;
    a.mesh.colors = mesh.has_colors() ? mesh.colors : std::vector<double>(mesh.vertices.size(), 0.5);
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
        if (!report.degenerate[t]) a.mesh.triangles.push_back(mesh.triangles[t]);
    a.per_triangle = opt.per_triangle;
    a.template_weights = barycentric_template(opt.per_triangle);

    const std::size_t n = a.size();
    a.colors = realize_bound_colors(a, true);
    a.opacity_logits.assign(n, logit(opt.opacity));
    a.rotations2d.assign(2 * n, 0.0);
    a.log_scales.resize(3 * n);
    for (std::size_t t = 0; t < a.cluster_count(); ++t) {
        const auto& tri = a.mesh.triangles[t];
        const double e = mean_edge_length(a.mesh.vertex(tri[0]), a.mesh.vertex(tri[1]), a.mesh.vertex(tri[2]));
        for (std::size_t k = 0; k < a.per_triangle; ++k) {
            const std::size_t i = t * a.per_triangle + k;
            a.rotations2d[2 * i] = 1.0; // aligned with the first edge
            a.log_scales[3 * i] = a.log_scales[3 * i + 1] = std::log(opt.scale_factor * e);
            a.log_scales[3 * i + 2] = std::log(opt.normal_factor * e);
        }
    }
    return a;
}

/// A learnable slice of a bound asset: `rows` x `cols` values, row-major.
struct ParameterView {
    std::string name;
    std::vector<double>* values;
    std::size_t rows;
    std::size_t cols;
};

/// The five groups optimized in the bound stage. The barycentric template is frozen
/// and deliberately absent.
inline std::vector<ParameterView> learnable_views(BoundAsset& a) {
    const std::size_t n = a.size();
    return {{"vertices", &a.mesh.vertices, a.mesh.vertex_count(), 3},
            {"colors", &a.colors, n, 3},
            {"opacities", &a.opacity_logits, n, 1},
            {"rotations", &a.rotations2d, n, 2},
            {"scales", &a.log_scales, n, 3}};
}

/// Posed free cloud for a deformation frame (Eq. 7 centers, re-oriented frames).
/// A triangle collapsed in this frame keeps the rotation from `previous`.
inline GaussianCloud3D apply_deformation(const BoundAsset& a, std::span<const double> frame,
                                         const GaussianCloud3D* previous = nullptr) {
    for (double v : frame)
        if (!std::isfinite(v)) throw NumericError("apply_deformation: non-finite vertex position");
    return realize_cloud(a, frame, previous != nullptr ? &previous->rotations : nullptr);
}

/// Caps each Gaussian's scales at `factor` times its host's mean edge length (log space).
inline void clamp_scales(BoundAsset& a, double factor = 2.0) {
    for (std::size_t t = 0; t < a.cluster_count(); ++t) {
        const auto& tri = a.mesh.triangles[t];
        const double e = mean_edge_length(a.mesh.vertex(tri[0]), a.mesh.vertex(tri[1]), a.mesh.vertex(tri[2]));
        if (!(e > 0.0)) continue;
        const double cap = std::log(factor * e);
        for (std::size_t k = 0; k < a.per_triangle; ++k)
            for (int j = 0; j < 3; ++j) {
                double& s = a.log_scales[3 * (t * a.per_triangle + k) + j];
                s = std::min(s, cap);
            }
    }
}

/// Uniform-weight graph Laplacian of a triangle mesh: L d_i = d_i - mean of neighbours.
class Laplacian {
public:
    explicit Laplacian(const ColoredMesh& mesh) : neighbors_(mesh.vertex_count()) {
        for (const auto& tri : mesh.triangles)
            for (int k = 0; k < 3; ++k) {
                neighbors_[tri[k]].push_back(tri[(k + 1) % 3]);
                neighbors_[tri[k]].push_back(tri[(k + 2) % 3]);
            }
        for (auto& nb : neighbors_) {
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        }
    }

    std::vector<double> apply(std::span<const double> d) const {
        std::vector<double> out(d.size(), 0.0);
        for (std::size_t i = 0; i < neighbors_.size(); ++i) {
            const auto& nb = neighbors_[i];
            if (nb.empty()) continue;
            for (int k = 0; k < 3; ++k) {
                double mean = 0.0;
                for (std::uint32_t j : nb) mean += d[3 * j + k];
                out[3 * i + k] = d[3 * i + k] - mean / static_cast<double>(nb.size());
            }
        }
        return out;
    }

    /// Transpose of `apply`.
    std::vector<double> apply_transpose(std::span<const double> r) const {
        std::vector<double> out(r.size(), 0.0);
        for (std::size_t i = 0; i < neighbors_.size(); ++i) {
            const auto& nb = neighbors_[i];
            if (nb.empty()) continue;
            const double inv = 1.0 / static_cast<double>(nb.size());
            for (int k = 0; k < 3; ++k) {
                out[3 * i + k] += r[3 * i + k];
                for (std::uint32_t j : nb) out[3 * j + k] -= inv * r[3 * i + k];
            }
        }
        return out;
    }

private:
    std::vector<std::vector<std::uint32_t>> neighbors_;
};

/// Smoothness penalty weight * mean_i |L (v - v_rest)_i|^2 on vertex displacements,
/// so the rest shape itself is not pulled toward a smaller, smoother mesh.
/// Adds its gradient to `grad` and returns the penalty value.
inline double laplacian_penalty(const Laplacian& lap, std::span<const double> vertices,
                                std::span<const double> rest, double weight, std::vector<double>& grad) {
    if (weight == 0.0 || vertices.empty()) return 0.0;
    std::vector<double> d(vertices.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = vertices[i] - rest[i];
    const std::vector<double> ld = lap.apply(d);
    const double nv = static_cast<double>(vertices.size() / 3);
    double value = 0.0;
    for (double v : ld) value += v * v;
    const std::vector<double> g = lap.apply_transpose(ld);
    for (std::size_t i = 0; i < g.size(); ++i) grad[i] += 2.0 * weight * g[i] / nv;
    return weight * value / nv;
}

/// Vertex positions over time for a fixed topology.
struct DeformationStream {
    std::size_t vertex_count = 0;
    std::vector<double> timestamps;
    std::vector<std::vector<double>> frames; // 3 * vertex_count each

    std::size_t frame_count() const { return frames.size(); }

    void validate(std::size_t expected_vertices) const {
        if (vertex_count != expected_vertices)
            throw ValidationError("deformation stream has " + std::to_string(vertex_count) +
                                  " vertices, bound mesh has " + std::to_string(expected_vertices));
        if (timestamps.size() != frames.size()) throw ValidationError("deformation stream: timestamp count mismatch");
        for (std::size_t f = 0; f < frames.size(); ++f) {
            if (frames[f].size() != 3 * vertex_count)
                throw ValidationError("deformation frame " + std::to_string(f) + " has the wrong vertex count");
            for (double v : frames[f])
                if (!std::isfinite(v))
                    throw NumericError("deformation frame " + std::to_string(f) + " has non-finite positions");
        }
    }
};

/// Poses every frame in order; collapsed triangles inherit the previous frame's rotation
/// (the rest pose for the first frame).
inline std::vector<GaussianCloud3D> play(const BoundAsset& a, const DeformationStream& stream) {
    stream.validate(a.mesh.vertex_count());
    std::vector<GaussianCloud3D> out;
    out.reserve(stream.frame_count());
    GaussianCloud3D prev = realize_cloud(a);
    for (const auto& frame : stream.frames) {
        out.push_back(apply_deformation(a, frame, &prev));
        prev = out.back();
    }
    return out;
}

} // namespace boundsplat::bind
