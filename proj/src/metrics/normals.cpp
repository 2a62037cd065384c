#include "jga/metrics/normals.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "jga/metrics/kdtree.hpp"

namespace jga {

namespace {

// Jacobi eigensolver for a symmetric 3x3; eigenvalues ascending, eigenvectors
// in the matching columns of v.
void eigen_sym3(Mat3 a, double eval[3], Mat3& evec) {
    evec = Mat3::identity();
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
        if (off < 1e-15) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(a(p, q)) < 1e-18) continue;
                double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1));
                double c = 1.0 / std::sqrt(t * t + 1), s = t * c;
                Mat3 r = Mat3::identity();
                r(p, p) = c;
                r(q, q) = c;
                r(p, q) = s;
                r(q, p) = -s;
                a = r.transposed() * a * r;
                evec = evec * r;
            }
    }
    int ord[3] = {0, 1, 2};
    std::sort(ord, ord + 3, [&](int i, int j) { return a(i, i) < a(j, j); });
    Mat3 sorted;
    for (int i = 0; i < 3; ++i) {
        eval[i] = a(ord[i], ord[i]);
        for (int r = 0; r < 3; ++r) sorted(r, i) = evec(r, ord[i]);
    }
    evec = sorted;
}

} // namespace

NormalEstimate estimate_normals(const std::vector<Vec3>& points, int k) {
    check(static_cast<int>(points.size()) >= k + 1,
          "normal estimation needs more points than neighbors");
    KdTree tree(points);
    std::size_t n = points.size();

    NormalEstimate est;
    est.normals.assign(n, Vec3{0, 0, 1});
    est.reliable.assign(n, 1);
    std::vector<std::vector<std::size_t>> nbrs(n);

    for (std::size_t i = 0; i < n; ++i) {
        // k neighbors beyond the query point itself.
        auto ids = tree.knearest(points[i], k + 1);
        std::vector<std::size_t> others;
        for (std::size_t j : ids)
            if (j != i) others.push_back(j);
        if (others.size() > static_cast<std::size_t>(k)) others.resize(k);
        nbrs[i] = others;

        Vec3 mean = points[i];
        for (std::size_t j : others) mean += points[j];
        mean = mean / static_cast<double>(others.size() + 1);
        Mat3 cov;
        auto accum = [&](const Vec3& p) {
            Vec3 d = p - mean;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) cov(r, c) += d[r] * d[c];
        };
        accum(points[i]);
        for (std::size_t j : others) accum(points[j]);

        double eval[3];
        Mat3 evec;
        eigen_sym3(cov, eval, evec);
        if (eval[2] <= 0 || eval[1] <= 1e-9 * eval[2]) {
            est.reliable[i] = 0;
            continue;
        }
        Vec3 nrm{evec(0, 0), evec(1, 0), evec(2, 0)};
        est.normals[i] = nrm.normalized();
    }

    // Orientation: minimum spanning tree over the symmetrized k-NN graph with
    // weight 1 - |n_i . n_j|, one component at a time.
    std::vector<std::vector<std::size_t>> graph(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j : nbrs[i]) {
            graph[i].push_back(j);
            graph[j].push_back(i);
        }

    std::vector<char> visited(n, 0);
    using Edge = std::pair<double, std::pair<std::size_t, std::size_t>>;
    while (true) {
        std::size_t root = n;
        for (std::size_t i = 0; i < n; ++i)
            if (!visited[i] && (root == n || points[i].z > points[root].z)) root = i;
        if (root == n) break;
        if (est.normals[root].z < 0) est.normals[root] = est.normals[root] * -1.0;
        visited[root] = 1;

        std::priority_queue<Edge, std::vector<Edge>, std::greater<>> pq;
        for (std::size_t j : graph[root])
            pq.push({1.0 - std::abs(est.normals[root].dot(est.normals[j])), {root, j}});
        while (!pq.empty()) {
            auto [w, e] = pq.top();
            pq.pop();
            auto [from, to] = e;
            if (visited[to]) continue;
            visited[to] = 1;
            if (est.normals[from].dot(est.normals[to]) < 0)
                est.normals[to] = est.normals[to] * -1.0;
            for (std::size_t j : graph[to])
                if (!visited[j])
                    pq.push({1.0 - std::abs(est.normals[to].dot(est.normals[j])), {to, j}});
        }
    }
    return est;
}

double normal_error_deg(const std::vector<Vec3>& pred_points,
                        const std::vector<Vec3>& pred_normals,
                        const std::vector<Vec3>& gt_points,
                        const std::vector<Vec3>& gt_normals) {
    check(!pred_points.empty() && !gt_points.empty(), "normal error needs points");
    check(pred_points.size() == pred_normals.size() && gt_points.size() == gt_normals.size(),
          "normal count mismatch");
    auto assert_unit = [](const std::vector<Vec3>& ns) {
        for (const Vec3& v : ns)
            check(std::abs(v.norm() - 1.0) < 1e-6, "normals must be unit length");
    };
    assert_unit(pred_normals);
    assert_unit(gt_normals);

    KdTree tree(gt_points);
    double s = 0;
    for (std::size_t i = 0; i < pred_points.size(); ++i) {
        std::size_t j = tree.nearest(pred_points[i]).first;
        double d = std::clamp(pred_normals[i].dot(gt_normals[j]), -1.0, 1.0);
        s += std::acos(d) * 180.0 / 3.14159265358979323846;
    }
    return s / pred_points.size();
}

} // namespace jga
