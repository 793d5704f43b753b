#pragma once

#include "boundsplat/core/camera.hpp"
#include "boundsplat/core/image.hpp"
#include "boundsplat/core/math.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace boundsplat::raster {

struct RasterSettings {
    Vec3 background = Vec3::Zero();
    int tile_size = 16;
    double near_plane = 0.2;
    /// Isotropic variance (pixels^2) added to every projected 3D covariance.
    double lowpass = 0.3;
    /// Kernel support radius in standard deviations. Beyond it G is treated as 0;
    /// exp(-cutoff^2 / 2) ~ 1.5e-8 keeps the truncation jump far below gradient-check tolerances.
    double cutoff_sigma = 6.0;
    double max_alpha = 0.99;
    double min_transmittance = 1e-4;
};

enum class SplatKind { Gaussian3D, Surfel };

/// One projected primitive. 3D Gaussians use the screen-space mean and conic;
/// surfels keep their world-space tangent frame for exact ray-plane evaluation.
struct Fragment {
    std::uint32_t source = 0;
    double depth = 0.0; // camera-space z of the center
    Vec2 mean = Vec2::Zero();
    Vec3 conic = Vec3::Zero(); // (a, b, c) of the inverse screen covariance [[a, b], [b, c]]
    Vec3 color = Vec3::Zero(); // clamped to [0, 1]
    double opacity = 0.0;
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1; // inclusive pixel bounds

    // Surfel path (world space).
    Vec3 center = Vec3::Zero();
    Vec3 axis_u = Vec3::UnitX();
    Vec3 axis_v = Vec3::UnitY();
    Vec3 normal = Vec3::UnitZ();
    double su = 1.0, sv = 1.0;
};

struct FragmentSet {
    SplatKind kind = SplatKind::Gaussian3D;
    std::size_t source_count = 0;
    std::vector<Fragment> fragments;
};

struct RenderTarget {
    Image color;
    Image alpha; // 1 channel
    Image depth; // 1 channel, alpha-normalized center depth (0 where empty)
    Vec3 background = Vec3::Zero();
};

/// Per-pixel ray, shared by all surfels evaluated at that pixel.
struct PixelRay {
    double px = 0.0, py = 0.0; // continuous pixel position
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ(); // camera-space z component is 1
};

inline PixelRay pixel_ray(const CameraPose& cam, int x, int y) {
    PixelRay r;
    r.px = x + 0.5;
    r.py = y + 0.5;
    r.origin = cam.center();
    r.direction = cam.ray_direction(r.px, r.py);
    return r;
}

/// Kernel evaluation of one fragment at one pixel.
struct Sample {
    bool hit = false;
    double g = 0.0;     // kernel value
    double depth = 0.0; // sorting depth
    // 3D path
    Vec2 offset = Vec2::Zero(); // pixel - mean
    // surfel path
    double u = 0.0, v = 0.0, denom = 0.0;
    Vec3 local = Vec3::Zero(); // intersection - center
};

inline Sample evaluate_gaussian(const Fragment& f, double px, double py, double cutoff_sq) {
    Sample s;
    s.offset = Vec2(px - f.mean[0], py - f.mean[1]);
    const double dx = s.offset[0], dy = s.offset[1];
    const double m = f.conic[0] * dx * dx + 2.0 * f.conic[1] * dx * dy + f.conic[2] * dy * dy;
    if (!(m <= cutoff_sq)) return s;
    s.hit = true;
    s.g = std::exp(-0.5 * m);
    s.depth = f.depth;
    return s;
}

inline Sample evaluate_surfel(const Fragment& f, const PixelRay& ray, double cutoff_sq, double near_plane) {
    Sample s;
    const double denom = f.normal.dot(ray.direction);
    if (std::abs(denom) < 1e-12) return s;
    const double t = f.normal.dot(f.center - ray.origin) / denom;
    if (!(t > near_plane)) return s;
    const Vec3 local = ray.origin + t * ray.direction - f.center;
    const double u = local.dot(f.axis_u) / f.su;
    const double v = local.dot(f.axis_v) / f.sv;
    const double q = u * u + v * v;
    if (!(q <= cutoff_sq)) return s;
    s.hit = true;
    s.g = std::exp(-0.5 * q);
    s.depth = t;
    s.u = u;
    s.v = v;
    s.denom = denom;
    s.local = local;
    return s;
}

} // namespace boundsplat::raster
