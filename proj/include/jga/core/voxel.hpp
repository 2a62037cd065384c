#pragma once

#include "jga/core/grid.hpp"
#include "jga/core/types.hpp"

namespace jga {

// Channel layout of a voxelized gaussian attribute vector.
namespace attr {
constexpr int kOffset = 0;    // 3 channels, sub-voxel offset in [0,1]
constexpr int kColor = 3;     // 3 channels
constexpr int kLogScale = 6;  // 3 channels
constexpr int kRotation = 9;  // 4 channels, quaternion w,x,y,z
constexpr int kOpacity = 13;  // 1 channel, logit
constexpr int kCount = 14;
} // namespace attr

// Gradient of a scalar loss with respect to one gaussian's stored fields.
struct GaussianGrad {
    Vec3 position;
    Vec3 color;
    Vec3 log_scale;
    Quat rotation{0, 0, 0, 0};
    double opacity_logit = 0;
};

// Bins gaussians into an R^3 grid over [-1,1]^3. Each occupied voxel stores
// the attr:: layout above; when several gaussians land in one voxel the one
// with the highest opacity wins (first occurrence on ties).
SparseVoxelTensor voxelize(const GaussianSet& set, int resolution);

// Inverse of voxelize for the surviving gaussians: one gaussian per voxel,
// position reconstructed from coordinate plus stored offset. Attribute
// channels round-trip bit exactly.
GaussianSet devoxelize(const SparseVoxelTensor& sparse);

// Maps per-gaussian gradients back onto voxel feature channels, chaining
// through the position reconstruction. Output has one attr::kCount block per
// voxel, in voxel order.
std::vector<double> devoxelize_backward(const SparseVoxelTensor& sparse,
                                        const std::vector<GaussianGrad>& grads);

} // namespace jga
