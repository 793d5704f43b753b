#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/types.hpp"
#include "boundsplat/extract/knn.hpp"

#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace boundsplat::extract {

struct ColorOptions {
    std::size_t k = 8;
};

/// Per-vertex colors as an opacity-weighted Gaussian-kernel average of the k nearest
/// surfel colors. The bandwidth is the median nearest-neighbour spacing of those k
/// surfels, so it follows the local sampling density rather than the vertex's
/// distance to the cloud. Falls back to the nearest surfel when all weights vanish.
inline std::vector<double> color_vertices(const std::vector<double>& vertices, const SurfelCloud2D& surfels,
                                          const ColorOptions& opt = {}) {
    if (surfels.empty()) throw ValidationError("color_vertices: no surfels");
    if (opt.k == 0) throw ValidationError("color_vertices: k must be positive");
    const PointIndex index(surfels.positions);
    const std::size_t ns = surfels.size();

    std::vector<double> spacing(ns, 0.0);
    tbb::parallel_for(std::size_t{0}, ns, [&](std::size_t i) {
        const auto nb = index.nearest(surfels.position(i), 2);
        spacing[i] = nb.size() > 1 ? nb[1].distance : 0.0;
    });

    const std::size_t nv = vertices.size() / 3;
    std::vector<double> out(3 * nv, 0.0);
    tbb::parallel_for(std::size_t{0}, nv, [&](std::size_t v) {
        const Vec3 p = row<3>(vertices, v);
        const auto nb = index.nearest(p, opt.k);
        std::vector<double> local;
        local.reserve(nb.size());
        for (const auto& q : nb) local.push_back(spacing[q.index]);
        std::nth_element(local.begin(), local.begin() + local.size() / 2, local.end());
        const double sigma = local[local.size() / 2];

        Vec3 acc = Vec3::Zero();
        double total = 0.0;
        if (sigma > 0.0)
            for (const auto& q : nb) {
                const double w = surfels.opacity(q.index) * std::exp(-0.5 * q.distance * q.distance / (sigma * sigma));
                acc += w * surfels.color(q.index);
                total += w;
            }
        const Vec3 c = total > 1e-300 ? Vec3(acc / total) : surfels.color(nb.front().index);
        for (int k = 0; k < 3; ++k) out[3 * v + k] = std::clamp(c[k], 0.0, 1.0);
    });
    return out;
}

} // namespace boundsplat::extract
