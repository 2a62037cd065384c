#pragma once

#include <utility>
#include <vector>

#include "jga/core/types.hpp"

namespace jga {

// Static 3D kd-tree; median split on the widest axis.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points);

    std::size_t size() const { return points_.size(); }
    const Vec3& point(std::size_t i) const { return points_[i]; }

    // Index of the closest point and its squared distance.
    std::pair<std::size_t, double> nearest(const Vec3& q) const;
    // Indices of the k closest points, nearest first. k must not exceed size.
    std::vector<std::size_t> knearest(const Vec3& q, int k) const;

private:
    struct Node {
        std::int32_t point;
        std::int32_t left = -1, right = -1;
        std::uint8_t axis;
    };
    std::int32_t build(std::vector<std::int32_t>& idx, int lo, int hi);

    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

} // namespace jga
