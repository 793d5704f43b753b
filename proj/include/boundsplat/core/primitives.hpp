#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/math.hpp"
#include "boundsplat/core/types.hpp"

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <utility>

namespace boundsplat {

/// Built-in coarse shapes that stand in for an externally generated initial mesh.
/// All are closed, outward-wound and uncolored.

inline ColoredMesh icosphere(int subdivisions, double radius = 1.0) {
    if (subdivisions < 0 || subdivisions > 7) throw ValidationError("icosphere: subdivisions must be in [0, 7]");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                               {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (auto& p : v) p.normalize();
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            v.push_back((v[a] + v[b]).normalized());
            const auto idx = static_cast<std::uint32_t>(v.size() - 1);
            mid.emplace(key, idx);
            return idx;
        };
        std::vector<Triangle> next;
        next.reserve(f.size() * 4);
        for (const auto& tri : f) {
            const std::uint32_t ab = midpoint(tri[0], tri[1]), bc = midpoint(tri[1], tri[2]), ca = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], ab, ca});
            next.push_back({tri[1], bc, ab});
            next.push_back({tri[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    ColoredMesh mesh;
    mesh.vertices.reserve(3 * v.size());
    for (const auto& p : v)
        for (int k = 0; k < 3; ++k) mesh.vertices.push_back(radius * p[k]);
    mesh.triangles = std::move(f);
    return mesh;
}

/// Axis-aligned box centered at the origin, each face split into n x n quads.
inline ColoredMesh box_mesh(const Vec3& half_extent, int n = 1) {
    if (n < 1) throw ValidationError("box_mesh: subdivision must be >= 1");
    ColoredMesh mesh;
    std::map<std::tuple<long, long, long>, std::uint32_t> index;
    auto vertex = [&](const Vec3& p) {
        const auto key = std::make_tuple(std::lround(p[0] * 1e6), std::lround(p[1] * 1e6), std::lround(p[2] * 1e6));
        auto it = index.find(key);
        if (it != index.end()) return it->second;
        const auto idx = static_cast<std::uint32_t>(mesh.vertex_count());
        for (int k = 0; k < 3; ++k) mesh.vertices.push_back(p[k]);
        index.emplace(key, idx);
        return idx;
    };
    for (int axis = 0; axis < 3; ++axis)
        for (int side : {-1, 1}) {
            const int u = (axis + 1) % 3, w = (axis + 2) % 3;
            auto point = [&](int i, int j) {
                Vec3 p;
                p[axis] = side * half_extent[axis];
                p[u] = half_extent[u] * (-1.0 + 2.0 * i / n);
                p[w] = half_extent[w] * (-1.0 + 2.0 * j / n);
                return vertex(p);
            };
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const std::uint32_t a = point(i, j), b = point(i + 1, j), c = point(i + 1, j + 1), d = point(i, j + 1);
                    // (u, w, axis) is right-handed, so (a, b, c) faces +axis.
                    if (side > 0) {
                        mesh.triangles.push_back({a, b, c});
                        mesh.triangles.push_back({a, c, d});
                    } else {
                        mesh.triangles.push_back({a, c, b});
                        mesh.triangles.push_back({a, d, c});
                    }
                }
        }
    return mesh;
}

/// Area-weighted vertex normals, unit length (zero for isolated vertices).
inline std::vector<double> vertex_normals(const ColoredMesh& mesh) {
    std::vector<double> n(mesh.vertices.size(), 0.0);
    for (const auto& tri : mesh.triangles) {
        const Vec3 a = mesh.vertex(tri[0]), b = mesh.vertex(tri[1]), c = mesh.vertex(tri[2]);
        const Vec3 fn = (b - a).cross(c - a);
        for (std::uint32_t i : tri) row<3>(n, i) += fn;
    }
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
        auto r = row<3>(n, i);
        const double len = r.norm();
        if (len > 0.0) r /= len;
    }
    return n;
}

/// Signed enclosed volume (positive for closed outward-wound meshes).
inline double signed_volume(const ColoredMesh& mesh) {
    double v = 0.0;
    for (const auto& tri : mesh.triangles)
        v += mesh.vertex(tri[0]).dot(mesh.vertex(tri[1]).cross(mesh.vertex(tri[2])));
    return v / 6.0;
}

} // namespace boundsplat
