#pragma once

#include "jga/core/types.hpp"

namespace jga {

struct NormalEstimate {
    std::vector<Vec3> normals;          // unit length
    std::vector<std::uint8_t> reliable; // 0 when the neighborhood was degenerate
};

// PCA normals from the k nearest neighbors (smallest covariance eigenvector),
// consistently oriented by propagating along a minimum spanning tree of the
// k-NN graph. Each connected component is rooted at its topmost point, whose
// normal is flipped to face +z.
NormalEstimate estimate_normals(const std::vector<Vec3>& points, int k = 16);

// Mean angle in degrees between each predicted normal and the normal of the
// nearest ground-truth point. Normals must be unit length.
double normal_error_deg(const std::vector<Vec3>& pred_points,
                        const std::vector<Vec3>& pred_normals,
                        const std::vector<Vec3>& gt_points,
                        const std::vector<Vec3>& gt_normals);

} // namespace jga
