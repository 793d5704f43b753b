#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/math.hpp"
#include "boundsplat/core/types.hpp"

#include <Eigen/Eigenvalues>

#include <string>
#include <vector>

namespace boundsplat::extract {

inline constexpr std::size_t kMinPoints = 100;

struct OrientedPointSet {
    std::vector<double> points;      // xyz
    std::vector<double> normals;     // unit xyz
    std::vector<double> confidences; // surfel opacity, 1 for raw samples

    std::size_t size() const { return confidences.size(); }
    Vec3 point(std::size_t i) const { return row<3>(points, i); }
    Vec3 normal(std::size_t i) const { return row<3>(normals, i); }

    void add(const Vec3& p, const Vec3& n, double confidence = 1.0) {
        points.insert(points.end(), {p[0], p[1], p[2]});
        const Vec3 u = n.normalized();
        normals.insert(normals.end(), {u[0], u[1], u[2]});
        confidences.push_back(confidence);
    }
};

/// Surfel centers with their tangent-plane normals; surfels below `prune_threshold`
/// opacity are skipped.
inline OrientedPointSet points_from_surfels(const SurfelCloud2D& surfels, double prune_threshold) {
    OrientedPointSet out;
    for (std::size_t i = 0; i < surfels.size(); ++i) {
        const double o = surfels.opacity(i);
        if (o < prune_threshold) continue;
        out.add(surfels.position(i), surfels.normal(i), o);
    }
    return out;
}

/// Rejects sets too small or too flat to enclose a volume.
inline void check_point_set(const OrientedPointSet& pts) {
    if (pts.points.size() != 3 * pts.size() || pts.normals.size() != 3 * pts.size())
        throw ValidationError("point set: inconsistent array sizes");
    if (pts.size() < kMinPoints)
        throw ValidationError("point set has " + std::to_string(pts.size()) + " points; at least " +
                              std::to_string(kMinPoints) + " are required");
    detail::require_finite(pts.points, "point set positions");
    detail::require_finite(pts.normals, "point set normals");
    Vec3 mean = Vec3::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i) mean += pts.point(i);
    mean /= static_cast<double>(pts.size());
    Mat3 cov = Mat3::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 d = pts.point(i) - mean;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(pts.size());
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    const double thin = std::sqrt(std::max(es.eigenvalues()[0], 0.0));
    const double wide = std::sqrt(std::max(es.eigenvalues()[2], 0.0));
    if (!(wide > 0.0) || thin <= 1e-6 * std::max(wide, 1.0))
        throw ValidationError("point set is degenerate (coplanar within 1e-6)");
}

} // namespace boundsplat::extract
