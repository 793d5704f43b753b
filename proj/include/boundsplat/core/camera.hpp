#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/math.hpp"

#include <cmath>
#include <string>

namespace boundsplat {

/// Rigid world transform x -> rotation * x + translation.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    RigidTransform inverse() const { return {rotation.transpose(), -(rotation.transpose() * translation)}; }
};

/// Pinhole camera. Image-space convention: x right, y down, camera looks along +z;
/// pixel (i, j) is sampled at (i + 0.5, j + 0.5).
///
/// Orbit cameras use a polar elevation measured from the world +z axis, so 90
/// degrees sits on the equator and the [30, 150] training range spans both
/// hemispheres symmetrically.
struct CameraPose {
    double radius = 4.0;
    double azimuth_deg = 0.0;
    double elevation_deg = 90.0;
    double fov_deg = 45.0;
    int width = 256;
    int height = 256;

    // Derived quantities (world -> camera).
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;

    static CameraPose orbit(double radius, double azimuth_deg, double elevation_deg, double fov_deg, int width,
                            int height) {
        if (!(radius > 0.0) || !std::isfinite(radius)) throw ValidationError("camera radius must be > 0");
        if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
        if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ValidationError("camera fov must be in (0, 180)");
        const double az = deg_to_rad(azimuth_deg);
        const double el = deg_to_rad(elevation_deg);
        const Vec3 eye = radius * Vec3(std::sin(el) * std::cos(az), std::sin(el) * std::sin(az), std::cos(el));
        CameraPose cam = look_at(eye, Vec3::Zero(), Vec3::UnitZ(), fov_deg, width, height);
        cam.radius = radius;
        cam.azimuth_deg = azimuth_deg;
        cam.elevation_deg = elevation_deg;
        return cam;
    }

    static CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_deg, int width,
                              int height) {
        const Vec3 forward = (target - eye).normalized();
        Vec3 right = forward.cross(up);
        if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitY());
        if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitX());
        right.normalize();
        const Vec3 down = forward.cross(right);

        CameraPose cam;
        cam.radius = (eye - target).norm();
        cam.fov_deg = fov_deg;
        cam.width = width;
        cam.height = height;
        cam.rotation.row(0) = right.transpose();
        cam.rotation.row(1) = down.transpose();
        cam.rotation.row(2) = forward.transpose();
        cam.translation = -(cam.rotation * eye);
        cam.set_intrinsics();
        return cam;
    }

    /// Same camera expressed in a world that was moved by `world_motion`.
    CameraPose moved_with(const RigidTransform& world_motion) const {
        CameraPose cam = *this;
        const RigidTransform inv = world_motion.inverse();
        cam.translation = rotation * inv.translation + translation;
        cam.rotation = rotation * inv.rotation;
        return cam;
    }

    void set_intrinsics() {
        fy = 0.5 * height / std::tan(0.5 * deg_to_rad(fov_deg));
        fx = fy;
        cx = 0.5 * width;
        cy = 0.5 * height;
    }

    Vec3 center() const { return -(rotation.transpose() * translation); }
    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }

    /// Unnormalized world-space ray direction through a continuous pixel position,
    /// scaled so that its camera-space z component is 1.
    Vec3 ray_direction(double px, double py) const {
        return rotation.transpose() * Vec3((px - cx) / fx, (py - cy) / fy, 1.0);
    }
};

} // namespace boundsplat
