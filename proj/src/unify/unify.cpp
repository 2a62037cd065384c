#include "jga/unify/unify.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "jga/metrics/kdtree.hpp"

namespace jga {

Vec3 camera_backproject(const Camera& cam, double u, double v, double depth) {
    Vec3 p_cam{depth * (u - cam.cx) / cam.fx, depth * (v - cam.cy) / cam.fy, depth};
    return cam.to_world(p_cam);
}

bool camera_project(const Camera& cam, const Vec3& p_world, double& u, double& v,
                    double& z_out) {
    Vec3 p = cam.to_camera(p_world);
    z_out = p.z;
    if (p.z <= 0) return false;
    u = cam.fx * p.x / p.z + cam.cx;
    v = cam.fy * p.y / p.z + cam.cy;
    return true;
}

PointCloud backproject_depth(const DepthMap& depth, const Image& rgb, const Camera& cam) {
    cam.validate();
    check(depth.width == cam.width && depth.height == cam.height,
          "depth dims do not match the camera");
    check(rgb.width == cam.width && rgb.height == cam.height && rgb.channels == 3,
          "rgb dims do not match the camera");

    PointCloud cloud;
    for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x) {
            double d = depth.at(x, y);
            if (d <= 0) continue;
            ColoredPoint p;
            p.position = camera_backproject(cam, x, y, d);
            p.color = {rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2)};
            cloud.points.push_back(p);
        }
    cloud.empty_depth = cloud.points.empty();
    return cloud;
}

std::vector<GaussianAttributes> associate_nn(const std::vector<Vec3>& sources,
                                             const GaussianSet& gt) {
    check(!gt.gaussians.empty(), "association target set is empty");
    std::vector<Vec3> centers(gt.gaussians.size());
    for (size_t i = 0; i < centers.size(); ++i) centers[i] = gt.gaussians[i].position;
    KdTree tree(std::move(centers));

    std::vector<GaussianAttributes> out(sources.size());
    for (size_t i = 0; i < sources.size(); ++i)
        out[i] = gt.gaussians[tree.nearest(sources[i]).first];
    return out;
}

namespace {

double bilinear(const Image& img, double u, double v, int c) {
    double fu = std::clamp(u, 0.0, double(img.width - 1));
    double fv = std::clamp(v, 0.0, double(img.height - 1));
    int x0 = int(fu), y0 = int(fv);
    int x1 = std::min(x0 + 1, img.width - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    double ax = fu - x0, ay = fv - y0;
    return (1 - ax) * (1 - ay) * img.at(x0, y0, c) + ax * (1 - ay) * img.at(x1, y0, c) +
           (1 - ax) * ay * img.at(x0, y1, c) + ax * ay * img.at(x1, y1, c);
}

} // namespace

bool color_smpl_by_projection(SmplMesh& mesh, const Image& rgb, const DepthMap& depth,
                              const Camera& cam, double tau) {
    cam.validate();
    check(tau > 0, "visibility tolerance must be positive");
    check(depth.width == cam.width && depth.height == cam.height,
          "depth dims do not match the camera");
    mesh.vertex_colors.assign(mesh.vertices.size(), Vec3{0, 0, 0});
    mesh.visible.assign(mesh.vertices.size(), 0);

    bool any = false;
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        double u, v, z;
        if (!camera_project(cam, mesh.vertices[i], u, v, z)) continue;
        int px = int(std::lround(u)), py = int(std::lround(v));
        if (px < 0 || px >= depth.width || py < 0 || py >= depth.height) continue;
        double measured = depth.at(px, py);
        if (measured <= 0 || z > measured + tau) continue;
        mesh.visible[i] = 1;
        mesh.vertex_colors[i] = {bilinear(rgb, u, v, 0), bilinear(rgb, u, v, 1),
                                 bilinear(rgb, u, v, 2)};
        any = true;
    }
    return any;
}

namespace {

struct VoxelAccum {
    double sum[7] = {0, 0, 0, 0, 0, 0, 0};
    int count = 0;
};

// u = (p+1)/2 * R; the voxel index is its floor (clamped) and the offset the
// fractional remainder, mirroring the Gaussian voxelizer.
void accumulate(std::map<Coord, VoxelAccum>& cells, const Vec3& p, const double* extra,
                int n_extra, int resolution) {
    Coord c;
    double off[3];
    for (int a = 0; a < 3; ++a) {
        double u = (p[a] + 1.0) * 0.5 * resolution;
        int idx = std::clamp(int(std::floor(u)), 0, resolution - 1);
        c[a] = idx;
        off[a] = u - idx;
    }
    VoxelAccum& acc = cells[c];
    for (int a = 0; a < 3; ++a) acc.sum[a] += off[a];
    for (int k = 0; k < n_extra; ++k) acc.sum[3 + k] += extra[k];
    acc.count++;
}

SparseVoxelTensor build_from(const std::map<Coord, VoxelAccum>& cells, int resolution,
                             int channels) {
    SparseVoxelTensor out(resolution, channels);
    for (const auto& [c, acc] : cells) {
        double feat[7];
        for (int k = 0; k < channels; ++k) feat[k] = acc.sum[k] / acc.count;
        out.push(c, feat);
    }
    out.finalize();
    return out;
}

} // namespace

SparseVoxelTensor voxelize_cloud(const PointCloud& cloud, int resolution) {
    check(!cloud.points.empty(), "cannot voxelize an empty cloud");
    std::map<Coord, VoxelAccum> cells;
    for (const ColoredPoint& p : cloud.points) {
        double extra[3] = {p.color.x, p.color.y, p.color.z};
        accumulate(cells, p.position, extra, 3, resolution);
    }
    return build_from(cells, resolution, kCloudChannels);
}

SparseVoxelTensor voxelize_mesh_vertices(const SmplMesh& mesh, int resolution) {
    mesh.validate();
    check(mesh.visible.size() == mesh.vertices.size() &&
              mesh.vertex_colors.size() == mesh.vertices.size(),
          "mesh must carry visibility and color slots");
    std::map<Coord, VoxelAccum> cells;
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& col = mesh.vertex_colors[i];
        double extra[4] = {col.x, col.y, col.z, mesh.visible[i] ? 1.0 : 0.0};
        accumulate(cells, mesh.vertices[i], extra, 4, resolution);
    }
    return build_from(cells, resolution, kMeshChannels);
}

SparseVoxelTensor nn_targets(const SparseVoxelTensor& observed, const GaussianSet& gt) {
    check(observed.finalized() && !observed.empty(), "need a finalized observation");
    check(observed.channels() >= 3, "observation lacks offset channels");
    int r = observed.resolution();

    std::vector<Vec3> queries(observed.size());
    for (size_t i = 0; i < observed.size(); ++i) {
        const Coord& c = observed.coord(i);
        const double* f = observed.feature(i);
        for (int a = 0; a < 3; ++a)
            queries[i][a] = -1.0 + 2.0 / r * (c[a] + f[a]);
    }
    std::vector<GaussianAttributes> assoc = associate_nn(queries, gt);

    SparseVoxelTensor target = SparseVoxelTensor::aligned(observed, attr::kCount);
    for (size_t i = 0; i < target.size(); ++i) {
        const GaussianAttributes& g = assoc[i];
        const Coord& c = target.coord(i);
        double* f = target.feature(i);
        // Offsets address the associated center from this voxel, so decoding
        // the prediction reproduces that center even across voxel borders.
        for (int a = 0; a < 3; ++a)
            f[attr::kOffset + a] = (g.position[a] + 1.0) * 0.5 * r - c[a];
        f[attr::kColor + 0] = g.color.x;
        f[attr::kColor + 1] = g.color.y;
        f[attr::kColor + 2] = g.color.z;
        for (int a = 0; a < 3; ++a) f[attr::kLogScale + a] = g.log_scale[a];
        f[attr::kRotation + 0] = g.rotation.w;
        f[attr::kRotation + 1] = g.rotation.x;
        f[attr::kRotation + 2] = g.rotation.y;
        f[attr::kRotation + 3] = g.rotation.z;
        f[attr::kOpacity] = g.opacity_logit;
    }
    return target;
}

UnifyNet::UnifyNet(int in_channels, std::uint64_t seed, int width, int blocks)
    : in_channels_(in_channels) {
    check(in_channels >= 1, "unify net needs input channels");
    Rng rng(derive_seed(seed, "unify-init"));
    SparseResNetConfig cfg;
    cfg.in_ch = in_channels;
    cfg.out_ch = attr::kCount;
    cfg.width = width;
    cfg.blocks = blocks;
    net_ = std::make_unique<SparseResNet>(ps_, "unify", cfg, rng);
}

SparseVoxelTensor UnifyNet::forward(const SparseVoxelTensor& x) {
    check(x.channels() == in_channels_, "input channel count does not match the net");
    return net_->forward(x);
}

SparseVoxelTensor UnifyNet::backward(const SparseVoxelTensor& dy) {
    return net_->backward(dy);
}

double unify_train_step(UnifyNet& net, const SparseVoxelTensor& input,
                        const SparseVoxelTensor& target) {
    check(target.channels() == attr::kCount, "target channel count mismatch");
    check(target.size() == input.size(), "target rows must align with the input");
    net.params().zero_grad();
    SparseVoxelTensor pred = net.forward(input);

    double inv = 1.0 / double(pred.size() * pred.channels());
    SparseVoxelTensor dpred = SparseVoxelTensor::aligned(pred, pred.channels());
    double loss = 0;
    for (size_t i = 0; i < pred.features().size(); ++i) {
        double d = pred.features()[i] - target.features()[i];
        loss += d * d * inv;
        dpred.features()[i] = 2.0 * d * inv;
    }
    check(std::isfinite(loss), "unify loss is not finite");
    net.backward(dpred);
    return loss;
}

GaussianSet predict_gaussians(UnifyNet& net, const SparseVoxelTensor& input) {
    SparseVoxelTensor pred = net.forward(input);
    return devoxelize(pred);
}

} // namespace jga
