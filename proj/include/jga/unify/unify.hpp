#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "jga/core/types.hpp"
#include "jga/core/voxel.hpp"
#include "jga/nn/networks.hpp"

namespace jga {

struct ColoredPoint {
    Vec3 position;
    Vec3 color;
};

struct PointCloud {
    std::vector<ColoredPoint> points;
    bool empty_depth = false;
};

// Pinhole inverse at continuous pixel coordinates: camera-frame point
// d * K^-1 * (u, v, 1), mapped back to world space.
Vec3 camera_backproject(const Camera& cam, double u, double v, double depth);
// And its forward counterpart; z_out receives camera-frame depth.
bool camera_project(const Camera& cam, const Vec3& p_world, double& u, double& v,
                    double& z_out);

// Lifts every measured pixel (depth > 0) using its integer pixel coordinates
// and attaches the pixel's RGB.
PointCloud backproject_depth(const DepthMap& depth, const Image& rgb, const Camera& cam);

// Attributes of the Euclidean-nearest gt center for each source point; exact
// ties resolve to the lowest gt index.
std::vector<GaussianAttributes> associate_nn(const std::vector<Vec3>& sources,
                                             const GaussianSet& gt);

// Marks vertices that project inside the image and sit within tau of the
// measured depth, sampling their color bilinearly. Occluded or off-screen
// vertices keep zero color. Returns false when no vertex is visible.
bool color_smpl_by_projection(SmplMesh& mesh, const Image& rgb, const DepthMap& depth,
                              const Camera& cam, double tau);

// Voxelized partial observations. Cloud voxels carry mean offset + rgb of
// their points; vertex voxels add a visibility-fraction channel.
SparseVoxelTensor voxelize_cloud(const PointCloud& cloud, int resolution);
SparseVoxelTensor voxelize_mesh_vertices(const SmplMesh& mesh, int resolution);

inline constexpr int kCloudChannels = 6;
inline constexpr int kMeshChannels = 7;

// Per-voxel regression targets: attributes of the gt Gaussian nearest to the
// point each voxel represents, offsets re-encoded against that voxel.
SparseVoxelTensor nn_targets(const SparseVoxelTensor& observed, const GaussianSet& gt);

// Coordinate-preserving sparse attribute predictor shared by the depth and
// body-prior paths.
class UnifyNet {
public:
    UnifyNet(int in_channels, std::uint64_t seed, int width = 24, int blocks = 4);

    SparseVoxelTensor forward(const SparseVoxelTensor& x);
    SparseVoxelTensor backward(const SparseVoxelTensor& dy);

    ParamStore& params() { return ps_; }
    int in_channels() const { return in_channels_; }

private:
    int in_channels_;
    ParamStore ps_;
    std::unique_ptr<SparseResNet> net_;
};

// MSE against aligned targets; gradients accumulate into the net's store.
double unify_train_step(UnifyNet& net, const SparseVoxelTensor& input,
                        const SparseVoxelTensor& target);

// Runs the net and decodes the predicted attribute voxels into Gaussians.
GaussianSet predict_gaussians(UnifyNet& net, const SparseVoxelTensor& input);

} // namespace jga
