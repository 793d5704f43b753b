#pragma once

#include "boundsplat/core/camera.hpp"
#include "boundsplat/core/errors.hpp"
#include "boundsplat/raster/fragment.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cstdint>
#include <tuple>
#include <utility>
#include <vector>

namespace boundsplat::raster {

/// Fragment lists per screen tile, each sorted front to back by center depth.
struct TileGrid {
    int tile_size = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::uint32_t> offsets; // tiles_x * tiles_y + 1
    std::vector<std::uint32_t> entries; // indices into FragmentSet::fragments

    int tile_count() const { return tiles_x * tiles_y; }
    std::uint32_t begin(int tile) const { return offsets[tile]; }
    std::uint32_t end(int tile) const { return offsets[tile + 1]; }
};

inline TileGrid bin_fragments(const FragmentSet& fs, const CameraPose& cam, int tile_size) {
    TileGrid grid;
    grid.tile_size = tile_size;
    grid.tiles_x = (cam.width + tile_size - 1) / tile_size;
    grid.tiles_y = (cam.height + tile_size - 1) / tile_size;

    struct Key {
        std::uint32_t tile;
        double depth;
        std::uint32_t source;
        std::uint32_t fragment;
    };
    std::vector<Key> keys;
    for (std::size_t i = 0; i < fs.fragments.size(); ++i) {
        const Fragment& f = fs.fragments[i];
        for (int ty = f.y0 / tile_size; ty <= f.y1 / tile_size; ++ty)
            for (int tx = f.x0 / tile_size; tx <= f.x1 / tile_size; ++tx)
                keys.push_back({static_cast<std::uint32_t>(ty * grid.tiles_x + tx), f.depth, f.source,
                                static_cast<std::uint32_t>(i)});
    }
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
        return std::tie(a.tile, a.depth, a.source) < std::tie(b.tile, b.depth, b.source);
    });
    grid.offsets.assign(grid.tile_count() + 1, 0);
    grid.entries.resize(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        ++grid.offsets[keys[i].tile + 1];
        grid.entries[i] = keys[i].fragment;
    }
    for (int t = 0; t < grid.tile_count(); ++t) grid.offsets[t + 1] += grid.offsets[t];
    return grid;
}

namespace detail {

struct SurfelHit {
    double depth;
    std::uint32_t pos;
    Sample sample;
};

/// Visits the fragments covering one pixel in compositing order. 3D Gaussians
/// follow the tile's center-depth order; surfels are re-sorted per pixel by the
/// depth of the ray-plane intersection. `visit(pos, fragment, sample)` receives
/// the position within the tile list and returns false to stop.
template <typename Visitor>
void walk_pixel(const FragmentSet& fs, const TileGrid& grid, int tile, const PixelRay& ray, const RasterSettings& rs,
                std::vector<SurfelHit>& scratch, Visitor&& visit) {
    const double cutoff_sq = rs.cutoff_sigma * rs.cutoff_sigma;
    const std::uint32_t b = grid.begin(tile), e = grid.end(tile);
    const int x = static_cast<int>(ray.px), y = static_cast<int>(ray.py);
    if (fs.kind == SplatKind::Gaussian3D) {
        for (std::uint32_t p = b; p < e; ++p) {
            const Fragment& f = fs.fragments[grid.entries[p]];
            if (x < f.x0 || x > f.x1 || y < f.y0 || y > f.y1) continue;
            const Sample s = evaluate_gaussian(f, ray.px, ray.py, cutoff_sq);
            if (!s.hit) continue;
            if (!visit(p - b, f, s)) return;
        }
        return;
    }
    scratch.clear();
    for (std::uint32_t p = b; p < e; ++p) {
        const Fragment& f = fs.fragments[grid.entries[p]];
        if (x < f.x0 || x > f.x1 || y < f.y0 || y > f.y1) continue;
        const Sample s = evaluate_surfel(f, ray, cutoff_sq, rs.near_plane);
        if (s.hit) scratch.push_back({s.depth, p - b, s});
    }
    std::sort(scratch.begin(), scratch.end(),
              [](const SurfelHit& l, const SurfelHit& r) { return std::tie(l.depth, l.pos) < std::tie(r.depth, r.pos); });
    for (const SurfelHit& h : scratch)
        if (!visit(h.pos, fs.fragments[grid.entries[b + h.pos]], h.sample)) return;
}

inline int tile_of(const TileGrid& grid, int x, int y) {
    return (y / grid.tile_size) * grid.tiles_x + x / grid.tile_size;
}

} // namespace detail

/// Front-to-back alpha compositing over the tile grid (tiles run in parallel).
inline RenderTarget composite(const FragmentSet& fs, const TileGrid& grid, const CameraPose& cam,
                              const RasterSettings& rs = {}) {
    RenderTarget out;
    out.background = rs.background;
    out.color = Image(cam.width, cam.height, 3);
    out.alpha = Image(cam.width, cam.height, 1);
    out.depth = Image(cam.width, cam.height, 1);

    tbb::parallel_for(tbb::blocked_range<int>(0, grid.tile_count()), [&](const tbb::blocked_range<int>& range) {
        std::vector<detail::SurfelHit> scratch;
        for (int tile = range.begin(); tile != range.end(); ++tile) {
            const int tx = tile % grid.tiles_x, ty = tile / grid.tiles_x;
            const int x_end = std::min(cam.width, (tx + 1) * grid.tile_size);
            const int y_end = std::min(cam.height, (ty + 1) * grid.tile_size);
            for (int y = ty * grid.tile_size; y < y_end; ++y)
                for (int x = tx * grid.tile_size; x < x_end; ++x) {
                    const PixelRay ray = pixel_ray(cam, x, y);
                    double t = 1.0, depth = 0.0;
                    Vec3 c = Vec3::Zero();
                    detail::walk_pixel(fs, grid, tile, ray, rs, scratch,
                                       [&](std::uint32_t, const Fragment& f, const Sample& s) {
                                           const double a = std::min(rs.max_alpha, f.opacity * s.g);
                                           c += f.color * (a * t);
                                           depth += s.depth * a * t;
                                           t *= 1.0 - a;
                                           return t >= rs.min_transmittance;
                                       });
                    c += t * rs.background;
                    for (int k = 0; k < 3; ++k) out.color.at(x, y, k) = c[k];
                    const double alpha = 1.0 - t;
                    out.alpha.at(x, y) = alpha;
                    out.depth.at(x, y) = alpha > 0.0 ? depth / alpha : 0.0;
                }
        }
    });
    return out;
}

} // namespace boundsplat::raster
