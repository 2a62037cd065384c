#include "jga/core/types.hpp"

namespace jga {

bool Mat3::is_orthonormal(double tol) const {
    Mat3 g = (*this) * transposed();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double want = i == j ? 1.0 : 0.0;
            if (std::abs(g(i, j) - want) > tol) return false;
        }
    return true;
}

Mat3 Quat::to_matrix() const {
    double xx = x * x, yy = y * y, zz = z * z;
    double xy = x * y, xz = x * z, yz = y * z;
    double wx = w * x, wy = w * y, wz = w * z;
    Mat3 r;
    r.m = {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
           2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
           2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
    return r;
}

void Camera::validate() const {
    check(width > 0 && height > 0, "camera image size must be positive");
    check(fx > 0 && fy > 0, "camera focal lengths must be positive");
    check(rotation.is_orthonormal(), "camera rotation must be orthonormal");
}

void SmplMesh::validate() const {
    int n = static_cast<int>(vertices.size());
    for (const auto& f : faces)
        for (int idx : f)
            check(idx >= 0 && idx < n, "mesh face index out of range");
    if (!vertex_colors.empty())
        check(vertex_colors.size() == vertices.size(), "vertex color count mismatch");
    if (!visible.empty())
        check(visible.size() == vertices.size(), "visibility flag count mismatch");
}

void LossWeights::validate() const {
    check(l1 >= 0 && ssim >= 0 && lpips >= 0 && kl >= 0 && occupancy >= 0 &&
              attr >= 0 && render >= 0,
          "loss weights must be nonnegative");
}

} // namespace jga
