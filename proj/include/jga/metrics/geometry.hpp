#pragma once

#include <array>

#include "jga/core/types.hpp"

namespace jga {

// Exact closest point on a triangle (vertex / edge / face regions).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Median-split bounding-volume tree over triangles for nearest-surface
// queries.
class TriangleBvh {
public:
    TriangleBvh(const std::vector<Vec3>& vertices,
                const std::vector<std::array<int, 3>>& faces);

    double distance(const Vec3& p) const;
    std::size_t triangle_count() const { return tris_.size(); }

private:
    struct Node {
        Vec3 lo, hi;
        std::int32_t left = -1, right = -1;
        std::int32_t begin = 0, count = 0; // leaf triangle range
    };
    std::int32_t build(int lo, int hi);

    std::vector<std::array<Vec3, 3>> tris_;
    std::vector<Vec3> centroids_;
    std::vector<std::int32_t> order_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

// Halved symmetric mean of nearest-neighbor L2 distances.
double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Mean exact point-to-surface distance.
double p2s(const std::vector<Vec3>& points, const SmplMesh& mesh);

} // namespace jga
