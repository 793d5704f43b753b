#pragma once

#include "boundsplat/core/types.hpp"
#include "boundsplat/extract/poisson.hpp"

#include <numeric>
#include <unordered_map>
#include <vector>

namespace boundsplat::extract {

namespace detail {

// Six tetrahedra sharing the cube diagonal 0-7; corner bits are (x, y, z). Neighbouring
// cubes split their shared faces along the same diagonal, so the surface is watertight.
inline constexpr int kTets[6][4] = {{0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7},
                                    {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7}};

} // namespace detail

/// Level set `grid.iso` by marching tetrahedra. Triangles face toward decreasing
/// field values, so a solid with outward normals gets positive signed volume and an
/// inverted field negative. Vertices are shared across cells.
inline ColoredMesh marching_tetrahedra(const IndicatorGrid& grid) {
    const int n = grid.n;
    const double iso = grid.iso;
    ColoredMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    const std::uint64_t total = static_cast<std::uint64_t>(grid.values.size());

    // Edges are keyed by (lower node, higher node); callers pass them in that order.
    auto vertex_on = [&](std::size_t a, std::size_t b, const Vec3& pa, const Vec3& pb) -> std::uint32_t {
        const std::uint64_t key = static_cast<std::uint64_t>(a) * total + b;
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const double fa = grid.values[a], fb = grid.values[b];
        // Keep vertices off the grid nodes so no triangle collapses to zero area.
        const double t = std::clamp((iso - fa) / (fb - fa), 0.01, 0.99);
        const Vec3 p = pa + t * (pb - pa);
        const auto id = static_cast<std::uint32_t>(mesh.vertex_count());
        mesh.vertices.insert(mesh.vertices.end(), {p[0], p[1], p[2]});
        edge_vertex.emplace(key, id);
        return id;
    };

    auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, const Vec3& toward_low) {
        const Vec3 pa = mesh.vertex(a), pb = mesh.vertex(b), pc = mesh.vertex(c);
        if ((pb - pa).cross(pc - pa).dot(toward_low) < 0.0) std::swap(b, c);
        mesh.triangles.push_back({a, b, c});
    };

    for (int k = 0; k + 1 < n; ++k)
        for (int j = 0; j + 1 < n; ++j)
            for (int i = 0; i + 1 < n; ++i) {
                std::array<std::size_t, 8> idx{};
                std::array<bool, 8> high{};
                int count = 0;
                for (int c = 0; c < 8; ++c) {
                    idx[c] = grid.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                    high[c] = grid.values[idx[c]] > iso;
                    count += high[c];
                }
                if (count == 0 || count == 8) continue;
                for (const auto& tet : detail::kTets) {
                    std::array<int, 4> hi{}, lo{};
                    int nh = 0, nl = 0;
                    for (int c : tet) (high[c] ? hi[nh++] : lo[nl++]) = c;
                    if (nh == 0 || nl == 0) continue;
                    auto corner = [&](int c) { return grid.node(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)); };
                    auto cut = [&](int a, int b) {
                        return idx[a] < idx[b] ? vertex_on(idx[a], idx[b], corner(a), corner(b))
                                               : vertex_on(idx[b], idx[a], corner(b), corner(a));
                    };
                    Vec3 ch = Vec3::Zero(), cl = Vec3::Zero();
                    for (int q = 0; q < nh; ++q) ch += corner(hi[q]);
                    for (int q = 0; q < nl; ++q) cl += corner(lo[q]);
                    const Vec3 dir = cl / nl - ch / nh;
                    if (nh == 1 || nl == 1) {
                        const int apex = nh == 1 ? hi[0] : lo[0];
                        const auto& others = nh == 1 ? lo : hi;
                        emit(cut(apex, others[0]), cut(apex, others[1]), cut(apex, others[2]), dir);
                    } else {
                        const std::uint32_t a = cut(hi[0], lo[0]), b = cut(hi[0], lo[1]);
                        const std::uint32_t c = cut(hi[1], lo[1]), d = cut(hi[1], lo[0]);
                        emit(a, b, c, dir);
                        emit(a, c, d, dir);
                    }
                }
            }
    return mesh;
}

/// Keeps the connected component (through shared vertices) with the most triangles
/// and drops unreferenced vertices.
inline ColoredMesh largest_component(const ColoredMesh& mesh) {
    const std::size_t nv = mesh.vertex_count();
    std::vector<std::uint32_t> parent(nv);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& t : mesh.triangles) {
        const std::uint32_t r0 = find(t[0]);
        for (int k = 1; k < 3; ++k) {
            const std::uint32_t r = find(t[k]);
            if (r != r0) parent[std::max(r, r0)] = std::min(r, r0);
        }
    }
    std::vector<std::size_t> count(nv, 0);
    for (const auto& t : mesh.triangles) ++count[find(t[0])];
    const auto best = static_cast<std::uint32_t>(std::max_element(count.begin(), count.end()) - count.begin());

    ColoredMesh out;
    std::vector<std::uint32_t> remap(nv, UINT32_MAX);
    for (const auto& t : mesh.triangles) {
        if (find(t[0]) != best) continue;
        Triangle nt{};
        for (int k = 0; k < 3; ++k) {
            std::uint32_t& r = remap[t[k]];
            if (r == UINT32_MAX) {
                r = static_cast<std::uint32_t>(out.vertex_count());
                const Vec3 p = mesh.vertex(t[k]);
                out.vertices.insert(out.vertices.end(), {p[0], p[1], p[2]});
                if (mesh.has_colors()) {
                    const Vec3 c = mesh.color(t[k]);
                    out.colors.insert(out.colors.end(), {c[0], c[1], c[2]});
                }
            }
            nt[k] = r;
        }
        out.triangles.push_back(nt);
    }
    return out;
}

} // namespace boundsplat::extract
