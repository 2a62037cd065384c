#include "jga/metrics/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace jga {

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    check(!points_.empty(), "kd-tree needs at least one point");
    std::vector<std::int32_t> idx(points_.size());
    std::iota(idx.begin(), idx.end(), 0);
    nodes_.reserve(points_.size());
    root_ = build(idx, 0, static_cast<int>(points_.size()));
}

std::int32_t KdTree::build(std::vector<std::int32_t>& idx, int lo, int hi) {
    if (lo >= hi) return -1;
    Vec3 mn = points_[idx[lo]], mx = mn;
    for (int i = lo; i < hi; ++i)
        for (int a = 0; a < 3; ++a) {
            mn[a] = std::min(mn[a], points_[idx[i]][a]);
            mx[a] = std::max(mx[a], points_[idx[i]][a]);
        }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (mx[a] - mn[a] > mx[axis] - mn[axis]) axis = a;

    int mid = (lo + hi) / 2;
    std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                     [&](std::int32_t a, std::int32_t b) {
                         return points_[a][axis] < points_[b][axis];
                     });
    auto ni = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({idx[mid], -1, -1, static_cast<std::uint8_t>(axis)});
    std::int32_t l = build(idx, lo, mid);
    std::int32_t r = build(idx, mid + 1, hi);
    nodes_[ni].left = l;
    nodes_[ni].right = r;
    return ni;
}

std::pair<std::size_t, double> KdTree::nearest(const Vec3& q) const {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::max();

    // Explicit stack; depth bounded by tree height.
    std::vector<std::int32_t> stack{root_};
    while (!stack.empty()) {
        std::int32_t ni = stack.back();
        stack.pop_back();
        if (ni < 0) continue;
        const Node& n = nodes_[ni];
        const Vec3& p = points_[n.point];
        double d2 = (p - q).norm2();
        // Exact ties resolve to the lowest point index.
        if (d2 < best_d2 ||
            (d2 == best_d2 && static_cast<std::size_t>(n.point) < best)) {
            best_d2 = d2;
            best = static_cast<std::size_t>(n.point);
        }
        double diff = q[n.axis] - p[n.axis];
        std::int32_t near_side = diff < 0 ? n.left : n.right;
        std::int32_t far_side = diff < 0 ? n.right : n.left;
        if (diff * diff <= best_d2) stack.push_back(far_side);
        stack.push_back(near_side);
    }
    return {best, best_d2};
}

std::vector<std::size_t> KdTree::knearest(const Vec3& q, int k) const {
    check(k >= 1 && static_cast<std::size_t>(k) <= points_.size(),
          "k out of range for knearest");
    // Max-heap of (squared distance, index) keeps the current best k.
    std::priority_queue<std::pair<double, std::int32_t>> heap;

    std::vector<std::int32_t> stack{root_};
    while (!stack.empty()) {
        std::int32_t ni = stack.back();
        stack.pop_back();
        if (ni < 0) continue;
        const Node& n = nodes_[ni];
        const Vec3& p = points_[n.point];
        double d2 = (p - q).norm2();
        if (static_cast<int>(heap.size()) < k)
            heap.emplace(d2, n.point);
        else if (d2 < heap.top().first) {
            heap.pop();
            heap.emplace(d2, n.point);
        }
        double diff = q[n.axis] - p[n.axis];
        std::int32_t near_side = diff < 0 ? n.left : n.right;
        std::int32_t far_side = diff < 0 ? n.right : n.left;
        if (static_cast<int>(heap.size()) < k || diff * diff < heap.top().first)
            stack.push_back(far_side);
        stack.push_back(near_side);
    }

    std::vector<std::size_t> out(heap.size());
    for (auto i = out.size(); i-- > 0;) {
        out[i] = static_cast<std::size_t>(heap.top().second);
        heap.pop();
    }
    return out;
}

} // namespace jga
