#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "jga/common.hpp"

namespace jga {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0 ? *this / n : Vec3{0, 0, 0};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{};

    static Mat3 identity() {
        Mat3 r;
        r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        return r;
    }
    double& operator()(int r, int c) { return m[r * 3 + c]; }
    double operator()(int r, int c) const { return m[r * 3 + c]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }
    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
        return r;
    }
    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }
    bool is_orthonormal(double tol = 1e-6) const;
};

struct Quat {
    double w = 1, x = 0, y = 0, z = 0;

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quat normalized() const {
        double n = norm();
        check(n > 0, "zero quaternion cannot be normalized");
        return {w / n, x / n, y / n, z / n};
    }
    Mat3 to_matrix() const; // assumes *this is normalized
};

// One splat. Scale is kept as log standard deviations and opacity as a
// pre-sigmoid logit so the values roundtrip exactly through files and
// network features; activated values come from the accessors.
struct GaussianAttributes {
    Vec3 position;
    Vec3 color;       // rgb in [0,1]
    Vec3 log_scale;
    Quat rotation;    // stored as-is; consumers normalize before use
    double opacity_logit = 0;

    Vec3 scale() const {
        return {std::exp(log_scale.x), std::exp(log_scale.y), std::exp(log_scale.z)};
    }
    double opacity() const { return sigmoid(opacity_logit); }
};

struct Bounds {
    Vec3 lo{-1, -1, -1};
    Vec3 hi{1, 1, 1};
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }
};

struct GaussianSet {
    std::vector<GaussianAttributes> gaussians;
    Bounds bounds;

    std::size_t size() const { return gaussians.size(); }
    bool empty() const { return gaussians.empty(); }
};

struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    Mat3 rotation;     // world-to-camera
    Vec3 translation;
    int width = 0, height = 0;

    void validate() const;
    Vec3 to_camera(const Vec3& p_world) const { return rotation * p_world + translation; }
    Vec3 to_world(const Vec3& p_cam) const { return rotation.transposed() * (p_cam - translation); }
};

struct Image {
    int width = 0, height = 0, channels = 3;
    std::vector<double> pixels; // row-major (y, x, c), values in [0,1]

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          pixels(static_cast<std::size_t>(w) * h * c, fill) {}

    double& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t size() const { return pixels.size(); }
};

struct DepthMap {
    int width = 0, height = 0;
    std::vector<double> depth; // world units, 0 = no measurement

    DepthMap() = default;
    DepthMap(int w, int h, double fill = 0.0)
        : width(w), height(h), depth(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int x, int y) { return depth[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
};

struct SmplMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> vertex_colors;   // valid where visible[i]
    std::vector<std::uint8_t> visible; // per-vertex visibility flag

    void validate() const;
    bool has_colors() const { return !vertex_colors.empty(); }
};

// Weights for the combined training objective. w1..w3 scale the image terms
// inside the render loss; w4..w7 scale kl / occupancy / attribute / render.
struct LossWeights {
    double l1 = 0.8;
    double ssim = 0.2;
    double lpips = 0.1; // plug-point; no perceptual backend is bundled
    double kl = 5e-7;
    double occupancy = 1.0;
    double attr = 1.0;
    double render = 1.0;

    void validate() const;
};

} // namespace jga
