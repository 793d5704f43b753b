#pragma once

#include "boundsplat/core/camera.hpp"
#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/types.hpp"
#include "boundsplat/raster/fragment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace boundsplat::raster {

/// First-order (EWA) projection of a 3D covariance, without the low-pass term.
/// `mean_cam` is the camera-space center.
inline Mat2 project_covariance(const Vec3& mean_cam, const Mat3& cov_world, const CameraPose& cam) {
    const double x = mean_cam[0], y = mean_cam[1], z = mean_cam[2];
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / z, 0.0, -cam.fx * x / (z * z), 0.0, cam.fy / z, -cam.fy * y / (z * z);
    const Eigen::Matrix<double, 2, 3> t = j * cam.rotation;
    return t * cov_world * t.transpose();
}

namespace detail {

inline bool clip_bounds(Fragment& f, double ext_x, double ext_y, const CameraPose& cam) {
    f.x0 = std::max(0, static_cast<int>(std::ceil(f.mean[0] - ext_x - 0.5)));
    f.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(f.mean[0] + ext_x - 0.5)));
    f.y0 = std::max(0, static_cast<int>(std::ceil(f.mean[1] - ext_y - 0.5)));
    f.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(f.mean[1] + ext_y - 0.5)));
    return f.x0 <= f.x1 && f.y0 <= f.y1;
}

inline Vec3 clamp_color(const Vec3& c) { return c.cwiseMax(0.0).cwiseMin(1.0); }

[[noreturn]] inline void non_finite(std::size_t source, const char* what) {
    throw NumericError(std::string("rasterizer: non-finite ") + what + " for source index " + std::to_string(source));
}

} // namespace detail

/// 3D path: center in front of the near plane and kernel support intersecting the image.
inline Fragment project_gaussian(std::uint32_t source, const Vec3& position, const Mat3& rotation, const Vec3& scale,
                                 const Vec3& color, double opacity, const CameraPose& cam, const RasterSettings& rs,
                                 bool& visible) {
    visible = false;
    Fragment f;
    f.source = source;
    if (!position.allFinite() || !rotation.allFinite() || !scale.allFinite() || !color.allFinite() ||
        !std::isfinite(opacity))
        detail::non_finite(source, "parameters");
    const Vec3 pc = cam.to_camera(position);
    if (!(pc[2] > rs.near_plane)) return f;
    const Mat3 m = rotation * scale.asDiagonal();
    Mat2 cov = project_covariance(pc, m * m.transpose(), cam);
    cov(0, 0) += rs.lowpass;
    cov(1, 1) += rs.lowpass;
    const double det = cov.determinant();
    if (!(det > 0.0)) {
        if (!std::isfinite(det)) detail::non_finite(source, "screen covariance");
        return f;
    }
    f.depth = pc[2];
    f.mean = Vec2(cam.fx * pc[0] / pc[2] + cam.cx, cam.fy * pc[1] / pc[2] + cam.cy);
    f.conic = Vec3(cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det);
    f.color = detail::clamp_color(color);
    f.opacity = opacity;
    if (!f.mean.allFinite() || !f.conic.allFinite()) detail::non_finite(source, "projection");
    visible = detail::clip_bounds(f, rs.cutoff_sigma * std::sqrt(cov(0, 0)), rs.cutoff_sigma * std::sqrt(cov(1, 1)), cam);
    return f;
}

/// Surfel path: the tangent frame is kept in world space; the screen bounds are
/// the projection of the square enclosing the kernel support.
inline Fragment project_surfel(std::uint32_t source, const Vec3& position, const Mat3& rotation, const Vec2& scale,
                               const Vec3& color, double opacity, const CameraPose& cam, const RasterSettings& rs,
                               bool& visible) {
    visible = false;
    Fragment f;
    f.source = source;
    if (!position.allFinite() || !rotation.allFinite() || !scale.allFinite() || !color.allFinite() ||
        !std::isfinite(opacity))
        detail::non_finite(source, "parameters");
    const Vec3 pc = cam.to_camera(position);
    if (!(pc[2] > rs.near_plane)) return f;
    f.depth = pc[2];
    f.mean = Vec2(cam.fx * pc[0] / pc[2] + cam.cx, cam.fy * pc[1] / pc[2] + cam.cy);
    f.center = position;
    f.axis_u = rotation.col(0);
    f.axis_v = rotation.col(1);
    f.normal = rotation.col(2);
    f.su = scale[0];
    f.sv = scale[1];
    f.color = detail::clamp_color(color);
    f.opacity = opacity;

    const double c = rs.cutoff_sigma;
    double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
    bool behind = false;
    for (int corner = 0; corner < 4; ++corner) {
        const double a = (corner & 1) ? c : -c;
        const double b = (corner & 2) ? c : -c;
        const Vec3 p = cam.to_camera(position + a * f.su * f.axis_u + b * f.sv * f.axis_v);
        if (!(p[2] > rs.near_plane)) {
            behind = true;
            break;
        }
        const double sx = cam.fx * p[0] / p[2] + cam.cx, sy = cam.fy * p[1] / p[2] + cam.cy;
        lo_x = std::min(lo_x, sx);
        hi_x = std::max(hi_x, sx);
        lo_y = std::min(lo_y, sy);
        hi_y = std::max(hi_y, sy);
    }
    if (behind) {
        f.x0 = 0;
        f.y0 = 0;
        f.x1 = cam.width - 1;
        f.y1 = cam.height - 1;
        visible = true;
        return f;
    }
    if (!std::isfinite(lo_x + lo_y + hi_x + hi_y)) detail::non_finite(source, "projection");
    f.x0 = std::max(0, static_cast<int>(std::ceil(lo_x - 0.5)));
    f.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(hi_x - 0.5)));
    f.y0 = std::max(0, static_cast<int>(std::ceil(lo_y - 0.5)));
    f.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(hi_y - 0.5)));
    visible = f.x0 <= f.x1 && f.y0 <= f.y1;
    return f;
}

inline FragmentSet project(const GaussianCloud3D& cloud, const CameraPose& cam, const RasterSettings& rs = {}) {
    FragmentSet out;
    out.kind = SplatKind::Gaussian3D;
    out.source_count = cloud.size();
    out.fragments.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        bool visible = false;
        const Vec4 q = cloud.quaternion(i);
        const double qn = q.norm();
        if (!(qn > 0.0)) detail::non_finite(i, "rotation");
        Fragment f = project_gaussian(static_cast<std::uint32_t>(i), cloud.position(i), quat_to_rotation(q / qn),
                                      cloud.scale(i), cloud.color(i), cloud.opacity(i), cam, rs, visible);
        if (visible) out.fragments.push_back(f);
    }
    return out;
}

inline FragmentSet project(const SurfelCloud2D& surfels, const CameraPose& cam, const RasterSettings& rs = {}) {
    FragmentSet out;
    out.kind = SplatKind::Surfel;
    out.source_count = surfels.size();
    out.fragments.reserve(surfels.size());
    for (std::size_t i = 0; i < surfels.size(); ++i) {
        bool visible = false;
        const Vec4 q = surfels.quaternion(i);
        const double qn = q.norm();
        if (!(qn > 0.0)) detail::non_finite(i, "rotation");
        Fragment f = project_surfel(static_cast<std::uint32_t>(i), surfels.position(i), quat_to_rotation(q / qn),
                                    surfels.scale(i), surfels.color(i), surfels.opacity(i), cam, rs, visible);
        if (visible) out.fragments.push_back(f);
    }
    return out;
}

} // namespace boundsplat::raster
