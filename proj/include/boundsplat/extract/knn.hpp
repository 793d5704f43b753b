#pragma once

#include "boundsplat/core/errors.hpp"
#include "boundsplat/core/math.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <vector>

namespace boundsplat::extract {

/// k-nearest-neighbour queries over a fixed 3D point set.
class PointIndex {
public:
    using Point = boost::geometry::model::point<double, 3, boost::geometry::cs::cartesian>;
    using Entry = std::pair<Point, std::uint32_t>;

    explicit PointIndex(const std::vector<double>& xyz) {
        std::vector<Entry> entries;
        entries.reserve(xyz.size() / 3);
        for (std::size_t i = 0; i < xyz.size() / 3; ++i)
            entries.emplace_back(Point(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]), static_cast<std::uint32_t>(i));
        tree_ = Tree(entries.begin(), entries.end());
        size_ = entries.size();
    }

    std::size_t size() const { return size_; }

    struct Neighbor {
        std::uint32_t index;
        double distance;
    };

    /// Up to k neighbours of q sorted by distance (ties by index).
    std::vector<Neighbor> nearest(const Vec3& q, std::size_t k) const {
        std::vector<Entry> hits;
        tree_.query(boost::geometry::index::nearest(Point(q[0], q[1], q[2]), static_cast<unsigned>(k)),
                    std::back_inserter(hits));
        std::vector<Neighbor> out;
        out.reserve(hits.size());
        for (const auto& [p, idx] : hits) {
            const Vec3 d(p.get<0>() - q[0], p.get<1>() - q[1], p.get<2>() - q[2]);
            out.push_back({idx, d.norm()});
        }
        std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
            return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
        });
        return out;
    }

private:
    using Tree = boost::geometry::index::rtree<Entry, boost::geometry::index::quadratic<16>>;
    Tree tree_;
    std::size_t size_ = 0;
};

} // namespace boundsplat::extract
