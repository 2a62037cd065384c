#include "jga/metrics/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "jga/metrics/kdtree.hpp"

namespace jga {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;

    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));

    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));

    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && d4 - d3 >= 0 && d5 - d6 >= 0)
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

    double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    return (p - closest_point_on_triangle(p, a, b, c)).norm();
}

TriangleBvh::TriangleBvh(const std::vector<Vec3>& vertices,
                         const std::vector<std::array<int, 3>>& faces) {
    check(!faces.empty(), "surface distance needs at least one triangle");
    tris_.reserve(faces.size());
    centroids_.reserve(faces.size());
    for (const auto& f : faces) {
        for (int i : f)
            check(i >= 0 && i < static_cast<int>(vertices.size()), "face index out of range");
        std::array<Vec3, 3> t{vertices[f[0]], vertices[f[1]], vertices[f[2]]};
        tris_.push_back(t);
        centroids_.push_back((t[0] + t[1] + t[2]) / 3.0);
    }
    order_.resize(tris_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * tris_.size());
    root_ = build(0, static_cast<int>(tris_.size()));
}

std::int32_t TriangleBvh::build(int lo, int hi) {
    Node n;
    n.lo = Vec3{1e30, 1e30, 1e30};
    n.hi = Vec3{-1e30, -1e30, -1e30};
    for (int i = lo; i < hi; ++i)
        for (const Vec3& v : tris_[order_[i]])
            for (int a = 0; a < 3; ++a) {
                n.lo[a] = std::min(n.lo[a], v[a]);
                n.hi[a] = std::max(n.hi[a], v[a]);
            }
    auto ni = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(n);
    if (hi - lo <= 4) {
        nodes_[ni].begin = lo;
        nodes_[ni].count = hi - lo;
        return ni;
    }
    int axis = 0;
    Vec3 span = n.hi - n.lo;
    for (int a = 1; a < 3; ++a)
        if (span[a] > span[axis]) axis = a;
    int mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::int32_t a, std::int32_t b) {
                         return centroids_[a][axis] < centroids_[b][axis];
                     });
    std::int32_t l = build(lo, mid);
    std::int32_t r = build(mid, hi);
    nodes_[ni].left = l;
    nodes_[ni].right = r;
    return ni;
}

namespace {
double aabb_dist2(const Vec3& q, const Vec3& lo, const Vec3& hi) {
    double s = 0;
    for (int a = 0; a < 3; ++a) {
        double d = std::max({lo[a] - q[a], 0.0, q[a] - hi[a]});
        s += d * d;
    }
    return s;
}
} // namespace

double TriangleBvh::distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::max();
    std::vector<std::int32_t> stack{root_};
    while (!stack.empty()) {
        std::int32_t ni = stack.back();
        stack.pop_back();
        const Node& n = nodes_[ni];
        if (aabb_dist2(p, n.lo, n.hi) >= best * best) continue;
        if (n.left < 0) {
            for (int i = n.begin; i < n.begin + n.count; ++i) {
                const auto& t = tris_[order_[i]];
                best = std::min(best, point_triangle_distance(p, t[0], t[1], t[2]));
            }
        } else {
            // Nearer child first improves pruning.
            double dl = aabb_dist2(p, nodes_[n.left].lo, nodes_[n.left].hi);
            double dr = aabb_dist2(p, nodes_[n.right].lo, nodes_[n.right].hi);
            if (dl < dr) {
                stack.push_back(n.right);
                stack.push_back(n.left);
            } else {
                stack.push_back(n.left);
                stack.push_back(n.right);
            }
        }
    }
    return best;
}

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    check(!a.empty() && !b.empty(), "chamfer needs non-empty point sets");
    KdTree ta(a), tb(b);
    double sa = 0;
    for (const Vec3& p : a) sa += std::sqrt(tb.nearest(p).second);
    double sb = 0;
    for (const Vec3& p : b) sb += std::sqrt(ta.nearest(p).second);
    return 0.5 * (sa / a.size() + sb / b.size());
}

double p2s(const std::vector<Vec3>& points, const SmplMesh& mesh) {
    check(!points.empty(), "p2s needs points");
    TriangleBvh bvh(mesh.vertices, mesh.faces);
    double s = 0;
    for (const Vec3& p : points) s += bvh.distance(p);
    return s / points.size();
}

} // namespace jga
