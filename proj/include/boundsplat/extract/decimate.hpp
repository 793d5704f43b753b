#pragma once

#include "boundsplat/core/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <queue>
#include <vector>

namespace boundsplat::extract {

/// Quadric-error edge collapse down to `target_triangles`. Collapses that would
/// break the link condition or flip a neighbouring face are skipped, so a closed
/// manifold input stays closed. Meshes already within budget are returned as is.
inline ColoredMesh decimate(const ColoredMesh& mesh, std::size_t target_triangles) {
    if (mesh.triangle_count() <= target_triangles) return mesh;
    using Mat4 = Eigen::Matrix4d;
    const std::size_t nv = mesh.vertex_count();
    const bool colored = mesh.has_colors();

    std::vector<Vec3> pos(nv), col(nv, Vec3::Zero());
    for (std::size_t i = 0; i < nv; ++i) {
        pos[i] = mesh.vertex(i);
        if (colored) col[i] = mesh.color(i);
    }
    std::vector<Triangle> faces = mesh.triangles;
    std::vector<bool> face_alive(faces.size(), true);
    std::vector<std::vector<std::uint32_t>> vfaces(nv);
    for (std::uint32_t f = 0; f < faces.size(); ++f)
        for (std::uint32_t v : faces[f]) vfaces[v].push_back(f);

    std::vector<Mat4> quadric(nv, Mat4::Zero());
    for (const auto& t : faces) {
        const Vec3 e = (pos[t[1]] - pos[t[0]]).cross(pos[t[2]] - pos[t[0]]);
        const double area2 = e.norm();
        if (area2 <= 0.0) continue;
        const Vec3 nrm = e / area2;
        Eigen::Vector4d plane(nrm[0], nrm[1], nrm[2], -nrm.dot(pos[t[0]]));
        const Mat4 k = 0.5 * area2 * plane * plane.transpose();
        for (std::uint32_t v : t) quadric[v] += k;
    }

    std::vector<bool> alive(nv, true);
    std::vector<std::uint32_t> version(nv, 0);

    struct Candidate {
        double cost;
        std::uint32_t a, b, va, vb;
        Vec3 target;
        bool operator>(const Candidate& o) const {
            if (cost != o.cost) return cost > o.cost;
            return a != o.a ? a > o.a : b > o.b;
        }
    };
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;

    auto evaluate = [&](std::uint32_t a, std::uint32_t b) {
        const Mat4 q = quadric[a] + quadric[b];
        auto err = [&](const Vec3& p) {
            const Eigen::Vector4d h(p[0], p[1], p[2], 1.0);
            return std::max(0.0, h.dot(q * h));
        };
        const Mat3 a3 = q.topLeftCorner<3, 3>();
        Vec3 best = 0.5 * (pos[a] + pos[b]);
        double cost = err(best);
        const Eigen::FullPivLU<Mat3> lu(a3);
        if (lu.isInvertible() && lu.rcond() > 1e-9) {
            const Vec3 p = lu.solve(-q.topRightCorner<3, 1>());
            // Stay near the edge; far-away optima come from nearly flat neighbourhoods.
            if ((p - best).norm() < 2.0 * (pos[a] - pos[b]).norm() && err(p) <= cost) {
                best = p;
                cost = err(p);
            }
        }
        for (const Vec3& p : {pos[a], pos[b]})
            if (err(p) < cost) {
                best = p;
                cost = err(p);
            }
        heap.push({cost, a, b, version[a], version[b], best});
    };

    auto neighbors = [&](std::uint32_t v) {
        std::vector<std::uint32_t> out;
        for (std::uint32_t f : vfaces[v])
            if (face_alive[f])
                for (std::uint32_t u : faces[f])
                    if (u != v) out.push_back(u);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    };

    {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
        edges.reserve(3 * faces.size());
        for (const auto& t : faces)
            for (int k = 0; k < 3; ++k) edges.emplace_back(std::minmax(t[k], t[(k + 1) % 3]));
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        for (const auto& [a, b] : edges) evaluate(a, b);
    }

    std::size_t live_faces = faces.size();
    while (live_faces > target_triangles && !heap.empty()) {
        const Candidate c = heap.top();
        heap.pop();
        if (!alive[c.a] || !alive[c.b] || version[c.a] != c.va || version[c.b] != c.vb) continue;

        std::vector<std::uint32_t> shared;
        for (std::uint32_t f : vfaces[c.a])
            if (face_alive[f] && std::find(faces[f].begin(), faces[f].end(), c.b) != faces[f].end()) shared.push_back(f);
        if (shared.empty() || shared.size() > 2) continue;

        const auto na = neighbors(c.a), nb = neighbors(c.b);
        std::vector<std::uint32_t> common;
        std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
        if (common.size() != shared.size()) continue;

        bool flips = false;
        for (std::uint32_t v : {c.a, c.b}) {
            for (std::uint32_t f : vfaces[v]) {
                if (!face_alive[f] || std::find(shared.begin(), shared.end(), f) != shared.end()) continue;
                std::array<Vec3, 3> p{pos[faces[f][0]], pos[faces[f][1]], pos[faces[f][2]]};
                const Vec3 before = (p[1] - p[0]).cross(p[2] - p[0]);
                for (int k = 0; k < 3; ++k)
                    if (faces[f][k] == c.a || faces[f][k] == c.b) p[k] = c.target;
                const Vec3 after = (p[1] - p[0]).cross(p[2] - p[0]);
                if (after.norm() <= 1e-12 * before.norm() || before.normalized().dot(after.normalized()) < 0.2) {
                    flips = true;
                    break;
                }
            }
            if (flips) break;
        }
        if (flips) continue;

        // Collapse b into a.
        const double la = (c.target - pos[c.a]).norm(), lb = (c.target - pos[c.b]).norm();
        const double wa = la + lb > 0.0 ? lb / (la + lb) : 0.5;
        col[c.a] = wa * col[c.a] + (1.0 - wa) * col[c.b];
        pos[c.a] = c.target;
        quadric[c.a] += quadric[c.b];
        for (std::uint32_t f : shared) {
            face_alive[f] = false;
            --live_faces;
        }
        for (std::uint32_t f : vfaces[c.b]) {
            if (!face_alive[f]) continue;
            for (auto& v : faces[f])
                if (v == c.b) v = c.a;
            vfaces[c.a].push_back(f);
        }
        vfaces[c.b].clear();
        alive[c.b] = false;
        auto& fa = vfaces[c.a];
        fa.erase(std::remove_if(fa.begin(), fa.end(), [&](std::uint32_t f) { return !face_alive[f]; }), fa.end());
        std::sort(fa.begin(), fa.end());
        fa.erase(std::unique(fa.begin(), fa.end()), fa.end());
        ++version[c.a];
        for (std::uint32_t u : neighbors(c.a)) evaluate(std::min(u, c.a), std::max(u, c.a));
    }

    ColoredMesh out;
    std::vector<std::uint32_t> remap(nv, UINT32_MAX);
    for (std::uint32_t f = 0; f < faces.size(); ++f) {
        if (!face_alive[f]) continue;
        Triangle t{};
        for (int k = 0; k < 3; ++k) {
            std::uint32_t& r = remap[faces[f][k]];
            if (r == UINT32_MAX) {
                r = static_cast<std::uint32_t>(out.vertex_count());
                const Vec3& p = pos[faces[f][k]];
                out.vertices.insert(out.vertices.end(), {p[0], p[1], p[2]});
                if (colored) {
                    const Vec3& q = col[faces[f][k]];
                    out.colors.insert(out.colors.end(), {q[0], q[1], q[2]});
                }
            }
            t[k] = r;
        }
        out.triangles.push_back(t);
    }
    return out;
}

} // namespace boundsplat::extract
