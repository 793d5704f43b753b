#pragma once

// Synthetic scenes with known ground truth, used by the bundled data, the CLI
// tests and the acceptance run.

#include "boundsplat/bind/bind.hpp"
#include "boundsplat/core/primitives.hpp"

#include <cmath>

namespace boundsplat::pipeline {

/// Smooth three-channel pattern over the unit sphere.
inline Vec3 blob_color(const Vec3& dir) {
    return {0.5 + 0.35 * std::sin(3.0 * dir.x() + 1.0), 0.5 + 0.35 * std::sin(2.0 * dir.y() + 3.0 * dir.z()),
            0.5 + 0.3 * std::cos(4.0 * dir.z() - dir.x())};
}

/// Radius of the blob along a unit direction: a sphere with low-frequency bumps.
inline double blob_radius(const Vec3& dir) {
    return 1.0 + 0.12 * std::sin(2.0 * dir.x()) * std::cos(3.0 * dir.y()) + 0.1 * dir.z() * dir.z();
}

/// Subdivided icosphere pushed out to the blob surface, colored by `blob_color`.
/// `bumpy = false` keeps the unit sphere.
inline ColoredMesh textured_blob(int subdivisions, bool bumpy = true, bool colored = true) {
    ColoredMesh m = icosphere(subdivisions, 1.0);
    const std::size_t n = m.vertex_count();
    if (colored) m.colors.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 dir = m.vertex(i).normalized();
        const Vec3 p = (bumpy ? blob_radius(dir) : 1.0) * dir;
        for (int k = 0; k < 3; ++k) m.vertices[3 * i + k] = p[k];
        if (colored) {
            const Vec3 c = blob_color(dir);
            for (int k = 0; k < 3; ++k) m.colors[3 * i + k] = c[k];
        }
    }
    return m;
}

} // namespace boundsplat::pipeline
