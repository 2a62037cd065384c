#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "jga/metrics/geometry.hpp"
#include "jga/metrics/kdtree.hpp"
#include "jga/metrics/normals.hpp"
#include "jga/nn/rng.hpp"

using namespace jga;

namespace {

std::vector<Vec3> random_points(Rng& rng, std::size_t n, double span = 1.0) {
    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < n; ++i)
        pts.push_back({rng.uniform(-span, span), rng.uniform(-span, span), rng.uniform(-span, span)});
    return pts;
}

double brute_nearest_dist(const Vec3& q, const std::vector<Vec3>& pts) {
    double best = std::numeric_limits<double>::max();
    for (const Vec3& p : pts) best = std::min(best, (p - q).norm());
    return best;
}

double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double sa = 0, sb = 0;
    for (const Vec3& p : a) sa += brute_nearest_dist(p, b);
    for (const Vec3& p : b) sb += brute_nearest_dist(p, a);
    return 0.5 * (sa / a.size() + sb / b.size());
}

Mat3 rotation_zyx(double az, double ay, double ax) {
    auto rz = Mat3::identity();
    rz(0, 0) = std::cos(az); rz(0, 1) = -std::sin(az);
    rz(1, 0) = std::sin(az); rz(1, 1) = std::cos(az);
    auto ry = Mat3::identity();
    ry(0, 0) = std::cos(ay); ry(0, 2) = std::sin(ay);
    ry(2, 0) = -std::sin(ay); ry(2, 2) = std::cos(ay);
    auto rx = Mat3::identity();
    rx(1, 1) = std::cos(ax); rx(1, 2) = -std::sin(ax);
    rx(2, 1) = std::sin(ax); rx(2, 2) = std::cos(ax);
    return rz * ry * rx;
}

// Evenly spread unit directions (golden-angle spiral).
std::vector<Vec3> sphere_points(std::size_t n, double radius) {
    std::vector<Vec3> pts;
    double ga = 3.14159265358979323846 * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / n;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double t = ga * static_cast<double>(i);
        pts.push_back({radius * r * std::cos(t), radius * r * std::sin(t), radius * z});
    }
    return pts;
}

} // namespace

TEST_CASE("kd-tree nearest matches a linear scan") {
    Rng rng(71);
    auto pts = random_points(rng, 200);
    KdTree tree(pts);
    for (int i = 0; i < 300; ++i) {
        Vec3 q{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};
        auto [idx, d2] = tree.nearest(q);
        double want = brute_nearest_dist(q, pts);
        CHECK(std::sqrt(d2) == doctest::Approx(want).epsilon(1e-12));
        CHECK((pts[idx] - q).norm() == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("kd-tree k-nearest returns the closest k in order") {
    Rng rng(72);
    auto pts = random_points(rng, 120);
    KdTree tree(pts);
    for (int trial = 0; trial < 50; ++trial) {
        Vec3 q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        auto ids = tree.knearest(q, 9);
        REQUIRE(ids.size() == 9);
        std::vector<double> dists;
        for (const Vec3& p : pts) dists.push_back((p - q).norm());
        std::vector<double> sorted = dists;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 0; k < ids.size(); ++k) {
            CHECK((pts[ids[k]] - q).norm() == doctest::Approx(sorted[k]).epsilon(1e-12));
            if (k > 0)
                CHECK((pts[ids[k - 1]] - q).norm() <= (pts[ids[k]] - q).norm() + 1e-15);
        }
    }
}

TEST_CASE("closest point on triangle covers face, edge, and vertex regions") {
    Vec3 a{0, 0, 0}, b{2, 0, 0}, c{0, 2, 0};
    // Above the interior: the foot of the perpendicular.
    Vec3 f = closest_point_on_triangle({0.5, 0.5, 3.0}, a, b, c);
    CHECK((f - Vec3{0.5, 0.5, 0}).norm() == doctest::Approx(0).epsilon(1e-12));
    // Beyond edge ab: projects onto the edge.
    Vec3 e = closest_point_on_triangle({1.0, -1.0, 0.0}, a, b, c);
    CHECK((e - Vec3{1, 0, 0}).norm() == doctest::Approx(0).epsilon(1e-12));
    // Beyond vertex b.
    Vec3 v = closest_point_on_triangle({5.0, -1.0, 0.0}, a, b, c);
    CHECK((v - b).norm() == doctest::Approx(0).epsilon(1e-12));
    // Distances follow.
    CHECK(point_triangle_distance({0.5, 0.5, 3.0}, a, b, c) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(point_triangle_distance({1.0, -1.0, 0.0}, a, b, c) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("chamfer is zero for identical sets and exact for a known pair") {
    Rng rng(73);
    auto pts = random_points(rng, 40);
    CHECK(chamfer(pts, pts) == doctest::Approx(0).epsilon(1e-12));

    std::vector<Vec3> a{{0, 0, 0}}, b{{3, 4, 0}};
    CHECK(chamfer(a, b) == doctest::Approx(5.0).epsilon(1e-12)); // both directions see d=5
}

TEST_CASE("chamfer matches a brute-force scan and is symmetric") {
    Rng rng(74);
    auto a = random_points(rng, 60);
    auto b = random_points(rng, 45);
    double got = chamfer(a, b);
    CHECK(got == doctest::Approx(brute_chamfer(a, b)).epsilon(1e-10));
    CHECK(got == doctest::Approx(chamfer(b, a)).epsilon(1e-12));
}

TEST_CASE("p2s vanishes on the surface and equals height above a plane") {
    SmplMesh mesh;
    mesh.vertices = {{-5, -5, 0}, {5, -5, 0}, {0, 5, 0}};
    mesh.faces = {{0, 1, 2}};
    std::vector<Vec3> on{{0, 0, 0}, {1, -1, 0}, {-0.5, 0.5, 0}};
    CHECK(p2s(on, mesh) == doctest::Approx(0).epsilon(1e-12));
    std::vector<Vec3> above{{0, 0, 0.7}, {1, -1, 0.7}};
    CHECK(p2s(above, mesh) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("bvh surface distance matches an all-triangles scan") {
    Rng rng(75);
    SmplMesh mesh;
    mesh.vertices = random_points(rng, 36);
    for (int i = 0; i + 2 < 36; i += 3)
        mesh.faces.push_back({i, i + 1, i + 2});
    auto queries = random_points(rng, 80, 1.4);
    TriangleBvh bvh(mesh.vertices, mesh.faces);
    for (const Vec3& q : queries) {
        double want = std::numeric_limits<double>::max();
        for (const auto& f : mesh.faces)
            want = std::min(want, point_triangle_distance(q, mesh.vertices[f[0]],
                                                          mesh.vertices[f[1]],
                                                          mesh.vertices[f[2]]));
        CHECK(bvh.distance(q) == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("p2s is invariant under a rigid transform of points and mesh") {
    Rng rng(76);
    SmplMesh mesh;
    mesh.vertices = random_points(rng, 24);
    for (int i = 0; i + 2 < 24; i += 3) mesh.faces.push_back({i, i + 1, i + 2});
    auto pts = random_points(rng, 30, 1.3);
    double before = p2s(pts, mesh);

    Mat3 rot = rotation_zyx(0.4, -0.7, 1.1);
    Vec3 shift{2.0, -1.0, 0.5};
    SmplMesh moved = mesh;
    for (Vec3& v : moved.vertices) v = rot * v + shift;
    auto moved_pts = pts;
    for (Vec3& p : moved_pts) p = rot * p + shift;
    CHECK(p2s(moved_pts, moved) == doctest::Approx(before).epsilon(1e-9));
}

TEST_CASE("normal error handles aligned, orthogonal, and opposite normals") {
    std::vector<Vec3> pts{{0, 0, 0}};
    std::vector<Vec3> nz{{0, 0, 1}};
    CHECK(normal_error_deg(pts, nz, pts, nz) == doctest::Approx(0).epsilon(1e-10));
    std::vector<Vec3> nx{{1, 0, 0}};
    CHECK(normal_error_deg(pts, nx, pts, nz) == doctest::Approx(90.0).epsilon(1e-10));
    std::vector<Vec3> nmz{{0, 0, -1}};
    CHECK(normal_error_deg(pts, nmz, pts, nz) == doctest::Approx(180.0).epsilon(1e-10));
}

TEST_CASE("normal error matches a brute-force nearest-point pairing") {
    Rng rng(77);
    auto gt_pts = random_points(rng, 50);
    auto pred_pts = random_points(rng, 35);
    auto unit = [&] {
        Vec3 v{rng.normal(), rng.normal(), rng.normal()};
        return v.normalized();
    };
    std::vector<Vec3> gt_n, pred_n;
    for (std::size_t i = 0; i < gt_pts.size(); ++i) gt_n.push_back(unit());
    for (std::size_t i = 0; i < pred_pts.size(); ++i) pred_n.push_back(unit());

    double want = 0;
    for (std::size_t i = 0; i < pred_pts.size(); ++i) {
        std::size_t bj = 0;
        double bd = std::numeric_limits<double>::max();
        for (std::size_t j = 0; j < gt_pts.size(); ++j) {
            double d = (gt_pts[j] - pred_pts[i]).norm();
            if (d < bd) {
                bd = d;
                bj = j;
            }
        }
        double dot = std::clamp(pred_n[i].dot(gt_n[bj]), -1.0, 1.0);
        want += std::acos(dot) * 180.0 / 3.14159265358979323846;
    }
    want /= pred_pts.size();
    CHECK(normal_error_deg(pred_pts, pred_n, gt_pts, gt_n) ==
          doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("normal error rejects non-unit normals") {
    std::vector<Vec3> pts{{0, 0, 0}};
    std::vector<Vec3> bad{{0, 0, 2}};
    std::vector<Vec3> good{{0, 0, 1}};
    CHECK_THROWS_AS(normal_error_deg(pts, bad, pts, good), Error);
}

TEST_CASE("estimated normals on a planar grid point straight up") {
    std::vector<Vec3> pts;
    Rng rng(78);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            pts.push_back({x * 0.1 + rng.uniform(-0.01, 0.01),
                           y * 0.1 + rng.uniform(-0.01, 0.01), 0.0});
    auto est = estimate_normals(pts, 8);
    REQUIRE(est.normals.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(est.reliable[i] == 1);
        // Root faces +z and the plane is connected, so every normal is +z.
        CHECK(est.normals[i].z == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("estimated normals on a sphere are radial and consistently outward") {
    auto pts = sphere_points(400, 0.8);
    auto est = estimate_normals(pts, 12);
    int good = 0, outward = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Vec3 radial = pts[i].normalized();
        double dot = est.normals[i].dot(radial);
        if (dot > 0) ++outward;
        if (std::acos(std::clamp(std::abs(dot), 0.0, 1.0)) * 180.0 / 3.141592653589793 < 10.0)
            ++good;
    }
    CHECK(good >= 380);    // 95% within 10 degrees of radial
    CHECK(outward >= 380); // orientation propagated consistently from the top
}

TEST_CASE("normal estimation requires more points than neighbors") {
    auto pts = sphere_points(16, 1.0);
    CHECK_THROWS_AS(estimate_normals(pts, 16), Error);
    CHECK_NOTHROW(estimate_normals(sphere_points(17, 1.0), 16));
}

TEST_CASE("collinear neighborhoods are flagged unreliable") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({i * 0.1, 0, 0});
    auto est = estimate_normals(pts, 4);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(est.reliable[i] == 0);
}
