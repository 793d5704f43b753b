#pragma once

#include "boundsplat/core/camera.hpp"
#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/image.hpp"
#include "boundsplat/core/types.hpp"
#include "boundsplat/raster/composite.hpp"
#include "boundsplat/raster/fragment.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <string>
#include <vector>

namespace boundsplat::raster {

/// Gradient of the loss w.r.t. the screen-space / tangent-frame quantities of one fragment.
struct FragmentGrad {
    Vec2 d_mean = Vec2::Zero();
    Vec3 d_conic = Vec3::Zero(); // w.r.t. (a, b, c) of [[a, b], [b, c]]
    Vec3 d_color = Vec3::Zero();
    double d_opacity = 0.0;
    Vec3 d_center = Vec3::Zero();
    Vec3 d_axis_u = Vec3::Zero();
    Vec3 d_axis_v = Vec3::Zero();
    Vec3 d_normal = Vec3::Zero();
    double d_su = 0.0, d_sv = 0.0;

    FragmentGrad& operator+=(const FragmentGrad& o) {
        d_mean += o.d_mean;
        d_conic += o.d_conic;
        d_color += o.d_color;
        d_opacity += o.d_opacity;
        d_center += o.d_center;
        d_axis_u += o.d_axis_u;
        d_axis_v += o.d_axis_v;
        d_normal += o.d_normal;
        d_su += o.d_su;
        d_sv += o.d_sv;
        return *this;
    }
};

/// Backward pass of `composite`. The forward is recomputed per tile; per-tile
/// accumulators are reduced in tile order so results do not depend on scheduling.
/// `d_color` is dL/d(color image), H x W x 3.
inline std::vector<FragmentGrad> composite_backward(const FragmentSet& fs, const TileGrid& grid, const CameraPose& cam,
                                                    const Image& d_color, const RasterSettings& rs = {}) {
    if (d_color.width != cam.width || d_color.height != cam.height || d_color.channels != 3)
        throw ValidationError("composite_backward: gradient image must be " + std::to_string(cam.width) + "x" +
                              std::to_string(cam.height) + "x3");

    std::vector<std::vector<FragmentGrad>> per_tile(grid.tile_count());
    tbb::parallel_for(tbb::blocked_range<int>(0, grid.tile_count()), [&](const tbb::blocked_range<int>& range) {
        struct Contribution {
            std::uint32_t pos;
            double alpha;
            double transmittance;
            bool clamped;
            Sample sample;
        };
        std::vector<detail::SurfelHit> scratch;
        std::vector<Contribution> contributors;
        for (int tile = range.begin(); tile != range.end(); ++tile) {
            auto& acc = per_tile[tile];
            acc.assign(grid.end(tile) - grid.begin(tile), FragmentGrad{});
            if (acc.empty()) continue;
            const int tx = tile % grid.tiles_x, ty = tile / grid.tiles_x;
            const int x_end = std::min(cam.width, (tx + 1) * grid.tile_size);
            const int y_end = std::min(cam.height, (ty + 1) * grid.tile_size);
            for (int y = ty * grid.tile_size; y < y_end; ++y)
                for (int x = tx * grid.tile_size; x < x_end; ++x) {
                    const Vec3 dc(d_color.at(x, y, 0), d_color.at(x, y, 1), d_color.at(x, y, 2));
                    if (dc.isZero(0.0)) continue;
                    const PixelRay ray = pixel_ray(cam, x, y);
                    contributors.clear();
                    double t = 1.0;
                    detail::walk_pixel(fs, grid, tile, ray, rs, scratch,
                                       [&](std::uint32_t pos, const Fragment& f, const Sample& s) {
                                           const double raw = f.opacity * s.g;
                                           const double a = std::min(rs.max_alpha, raw);
                                           contributors.push_back({pos, a, t, raw > rs.max_alpha, s});
                                           t *= 1.0 - a;
                                           return t >= rs.min_transmittance;
                                       });
                    // Everything behind a contributor: later fragments plus the background.
                    Vec3 behind = t * rs.background;
                    for (auto it = contributors.rbegin(); it != contributors.rend(); ++it) {
                        const Fragment& f = fs.fragments[grid.entries[grid.begin(tile) + it->pos]];
                        FragmentGrad& g = acc[it->pos];
                        const double w = it->alpha * it->transmittance;
                        g.d_color += dc * w;
                        const double d_alpha = it->transmittance * dc.dot(f.color) - dc.dot(behind) / (1.0 - it->alpha);
                        behind += f.color * w;
                        if (it->clamped) continue;
                        const Sample& s = it->sample;
                        g.d_opacity += d_alpha * s.g;
                        const double d_power = d_alpha * f.opacity * s.g; // dG/dpower = G
                        if (fs.kind == SplatKind::Gaussian3D) {
                            const double dx = s.offset[0], dy = s.offset[1];
                            // power = -0.5 (a dx^2 + 2 b dx dy + c dy^2), dx = px - mean_x
                            g.d_mean[0] += d_power * (f.conic[0] * dx + f.conic[1] * dy);
                            g.d_mean[1] += d_power * (f.conic[1] * dx + f.conic[2] * dy);
                            g.d_conic += d_power * Vec3(-0.5 * dx * dx, -dx * dy, -0.5 * dy * dy);
                        } else {
                            // power = -0.5 (u^2 + v^2) with u, v the ray-plane hit in surfel coordinates.
                            const double gu = -d_power * s.u, gv = -d_power * s.v;
                            const double ru = f.axis_u.dot(ray.direction) / f.su;
                            const double rv = f.axis_v.dot(ray.direction) / f.sv;
                            const double gt = gu * ru + gv * rv; // dL/dt along the ray
                            g.d_center += gt * f.normal / s.denom - gu * f.axis_u / f.su - gv * f.axis_v / f.sv;
                            g.d_normal += -gt * s.local / s.denom;
                            g.d_axis_u += gu * s.local / f.su;
                            g.d_axis_v += gv * s.local / f.sv;
                            g.d_su += -gu * s.u / f.su;
                            g.d_sv += -gv * s.v / f.sv;
                        }
                    }
                }
        }
    });

    std::vector<FragmentGrad> out(fs.fragments.size());
    for (int tile = 0; tile < grid.tile_count(); ++tile) {
        const auto& acc = per_tile[tile];
        for (std::size_t p = 0; p < acc.size(); ++p) out[grid.entries[grid.begin(tile) + p]] += acc[p];
    }
    return out;
}

/// Gradients w.r.t. the raw parameters of a GaussianCloud3D. `rotation_matrices`
/// holds dL/dR (row-major 3x3) for callers that build R some other way.
struct CloudGradients {
    std::vector<double> positions;
    std::vector<double> colors;
    std::vector<double> opacity_logits;
    std::vector<double> log_scales;
    std::vector<double> rotations;
    std::vector<double> rotation_matrices;

    explicit CloudGradients(std::size_t n = 0)
        : positions(3 * n, 0.0), colors(3 * n, 0.0), opacity_logits(n, 0.0), log_scales(3 * n, 0.0),
          rotations(4 * n, 0.0), rotation_matrices(9 * n, 0.0) {}
};

struct SurfelGradients {
    std::vector<double> positions;
    std::vector<double> colors;
    std::vector<double> opacity_logits;
    std::vector<double> log_scales;
    std::vector<double> rotations;

    explicit SurfelGradients(std::size_t n = 0)
        : positions(3 * n, 0.0), colors(3 * n, 0.0), opacity_logits(n, 0.0), log_scales(2 * n, 0.0),
          rotations(4 * n, 0.0) {}
};

namespace detail {

inline Vec3 color_passthrough(const Vec3& raw, const Vec3& grad) {
    Vec3 out = grad;
    for (int k = 0; k < 3; ++k)
        if (raw[k] < 0.0 || raw[k] > 1.0) out[k] = 0.0;
    return out;
}

inline void require_finite_grad(const std::vector<double>& v, const char* group) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            throw NumericError(std::string("render_backward: non-finite gradient in ") + group + " at index " +
                               std::to_string(i));
}

} // namespace detail

/// Chains fragment gradients through the EWA projection of a 3D Gaussian cloud.
inline CloudGradients project_backward(const GaussianCloud3D& cloud, const FragmentSet& fs,
                                       const std::vector<FragmentGrad>& fg, const CameraPose& cam) {
    CloudGradients out(cloud.size());
    const Mat3& w = cam.rotation;
    for (std::size_t k = 0; k < fs.fragments.size(); ++k) {
        const Fragment& f = fs.fragments[k];
        const FragmentGrad& g = fg[k];
        const std::size_t i = f.source;
        const Vec3 pc = cam.to_camera(cloud.position(i));
        const double x = pc[0], y = pc[1], z = pc[2];
        const Vec4 q_raw = cloud.quaternion(i);
        const Vec4 q = q_raw.normalized();
        const Mat3 r = quat_to_rotation(q);
        const Vec3 s = cloud.scale(i);
        const Mat3 m = r * s.asDiagonal();
        const Mat3 cov3 = m * m.transpose();

        Eigen::Matrix<double, 2, 3> j;
        j << cam.fx / z, 0.0, -cam.fx * x / (z * z), 0.0, cam.fy / z, -cam.fy * y / (z * z);
        const Eigen::Matrix<double, 2, 3> t = j * w;

        Mat2 conic;
        conic << f.conic[0], f.conic[1], f.conic[1], f.conic[2];
        Mat2 g_conic;
        g_conic << g.d_conic[0], 0.5 * g.d_conic[1], 0.5 * g.d_conic[1], g.d_conic[2];
        const Mat2 g_cov2 = -conic * g_conic * conic;
        const Eigen::Matrix<double, 2, 3> g_t = 2.0 * g_cov2 * t * cov3;
        const Mat3 g_cov3 = t.transpose() * g_cov2 * t;
        const Eigen::Matrix<double, 2, 3> g_j = g_t * w.transpose();

        Vec3 g_pc = Vec3::Zero();
        // mean2d = (fx x / z + cx, fy y / z + cy)
        g_pc[0] += g.d_mean[0] * cam.fx / z;
        g_pc[1] += g.d_mean[1] * cam.fy / z;
        g_pc[2] += -g.d_mean[0] * cam.fx * x / (z * z) - g.d_mean[1] * cam.fy * y / (z * z);
        // Jacobian entries depend on the camera-space center.
        g_pc[0] += g_j(0, 2) * (-cam.fx / (z * z));
        g_pc[1] += g_j(1, 2) * (-cam.fy / (z * z));
        g_pc[2] += g_j(0, 0) * (-cam.fx / (z * z)) + g_j(0, 2) * (2.0 * cam.fx * x / (z * z * z)) +
                   g_j(1, 1) * (-cam.fy / (z * z)) + g_j(1, 2) * (2.0 * cam.fy * y / (z * z * z));
        row<3>(out.positions, i) += w.transpose() * g_pc;

        const Mat3 g_m = 2.0 * g_cov3 * m;
        const Mat3 g_r = g_m * s.asDiagonal();
        Vec3 g_s;
        for (int a = 0; a < 3; ++a) g_s[a] = g_m.col(a).dot(r.col(a));
        row<3>(out.log_scales, i) += g_s.cwiseProduct(s);
        Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(out.rotation_matrices.data() + 9 * i) += g_r;
        row<4>(out.rotations, i) += normalize_backward(q_raw, rotation_grad_to_quat(q, g_r));

        row<3>(out.colors, i) += detail::color_passthrough(cloud.color(i), g.d_color);
        const double o = cloud.opacity(i);
        out.opacity_logits[i] += g.d_opacity * o * (1.0 - o);
    }
    detail::require_finite_grad(out.positions, "positions");
    detail::require_finite_grad(out.colors, "colors");
    detail::require_finite_grad(out.opacity_logits, "opacities");
    detail::require_finite_grad(out.log_scales, "scales");
    detail::require_finite_grad(out.rotations, "rotations");
    return out;
}

/// Chains fragment gradients through the surfel tangent frames.
inline SurfelGradients project_backward(const SurfelCloud2D& surfels, const FragmentSet& fs,
                                        const std::vector<FragmentGrad>& fg) {
    SurfelGradients out(surfels.size());
    for (std::size_t k = 0; k < fs.fragments.size(); ++k) {
        const Fragment& f = fs.fragments[k];
        const FragmentGrad& g = fg[k];
        const std::size_t i = f.source;
        row<3>(out.positions, i) += g.d_center;
        Mat3 g_r;
        g_r.col(0) = g.d_axis_u;
        g_r.col(1) = g.d_axis_v;
        g_r.col(2) = g.d_normal;
        const Vec4 q_raw = surfels.quaternion(i);
        const Vec4 q = q_raw.normalized();
        row<4>(out.rotations, i) += normalize_backward(q_raw, rotation_grad_to_quat(q, g_r));
        out.log_scales[2 * i] += g.d_su * f.su;
        out.log_scales[2 * i + 1] += g.d_sv * f.sv;
        row<3>(out.colors, i) += detail::color_passthrough(surfels.color(i), g.d_color);
        const double o = surfels.opacity(i);
        out.opacity_logits[i] += g.d_opacity * o * (1.0 - o);
    }
    detail::require_finite_grad(out.positions, "positions");
    detail::require_finite_grad(out.colors, "colors");
    detail::require_finite_grad(out.opacity_logits, "opacities");
    detail::require_finite_grad(out.log_scales, "scales");
    detail::require_finite_grad(out.rotations, "rotations");
    return out;
}

} // namespace boundsplat::raster
