#include "jga/core/voxel.hpp"

#include <algorithm>

namespace jga {

SparseVoxelTensor voxelize(const GaussianSet& set, int resolution) {
    check(resolution > 0, "voxelize resolution must be positive");
    const int R = resolution;

    // Collision resolution pass: best gaussian index per occupied key.
    std::unordered_map<std::uint64_t, std::size_t> best;
    std::vector<Coord> cells(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Vec3& p = set.gaussians[i].position;
        check(set.bounds.contains(p), "gaussian outside scene bounds");
        Coord c;
        for (int a = 0; a < 3; ++a) {
            double u = (p[a] + 1.0) * 0.5 * R;
            auto idx = static_cast<std::int32_t>(std::floor(u));
            c[a] = std::clamp(idx, 0, R - 1);
        }
        cells[i] = c;
        auto [it, inserted] = best.emplace(coord_key(c), i);
        if (!inserted &&
            set.gaussians[i].opacity_logit > set.gaussians[it->second].opacity_logit)
            it->second = i;
    }

    SparseVoxelTensor out(R, attr::kCount);
    for (std::size_t i = 0; i < set.size(); ++i) {
        auto it = best.find(coord_key(cells[i]));
        if (it->second != i) continue;
        const GaussianAttributes& g = set.gaussians[i];
        double f[attr::kCount];
        for (int a = 0; a < 3; ++a) {
            double u = (g.position[a] + 1.0) * 0.5 * R;
            f[attr::kOffset + a] = u - cells[i][a];
            f[attr::kColor + a] = g.color[a];
            f[attr::kLogScale + a] = g.log_scale[a];
        }
        f[attr::kRotation + 0] = g.rotation.w;
        f[attr::kRotation + 1] = g.rotation.x;
        f[attr::kRotation + 2] = g.rotation.y;
        f[attr::kRotation + 3] = g.rotation.z;
        f[attr::kOpacity] = g.opacity_logit;
        out.push(cells[i], f);
    }
    out.finalize();
    return out;
}

GaussianSet devoxelize(const SparseVoxelTensor& sparse) {
    check(sparse.finalized(), "devoxelize requires a finalized sparse tensor");
    check(sparse.channels() == attr::kCount, "devoxelize expects gaussian attribute channels");
    const double cell = 2.0 / sparse.resolution();

    GaussianSet set;
    set.gaussians.reserve(sparse.size());
    for (std::size_t i = 0; i < sparse.size(); ++i) {
        const Coord& c = sparse.coord(i);
        const double* f = sparse.feature(i);
        GaussianAttributes g;
        for (int a = 0; a < 3; ++a) {
            g.position[a] = -1.0 + cell * (c[a] + f[attr::kOffset + a]);
            g.color[a] = f[attr::kColor + a];
            g.log_scale[a] = f[attr::kLogScale + a];
        }
        g.rotation = {f[attr::kRotation + 0], f[attr::kRotation + 1],
                      f[attr::kRotation + 2], f[attr::kRotation + 3]};
        g.opacity_logit = f[attr::kOpacity];
        set.gaussians.push_back(g);
    }
    return set;
}

std::vector<double> devoxelize_backward(const SparseVoxelTensor& sparse,
                                        const std::vector<GaussianGrad>& grads) {
    check(grads.size() == sparse.size(), "gradient count must match voxel count");
    const double cell = 2.0 / sparse.resolution();

    std::vector<double> out(sparse.size() * attr::kCount, 0.0);
    for (std::size_t i = 0; i < sparse.size(); ++i) {
        double* f = out.data() + i * attr::kCount;
        const GaussianGrad& g = grads[i];
        for (int a = 0; a < 3; ++a) {
            f[attr::kOffset + a] = g.position[a] * cell;
            f[attr::kColor + a] = g.color[a];
            f[attr::kLogScale + a] = g.log_scale[a];
        }
        f[attr::kRotation + 0] = g.rotation.w;
        f[attr::kRotation + 1] = g.rotation.x;
        f[attr::kRotation + 2] = g.rotation.y;
        f[attr::kRotation + 3] = g.rotation.z;
        f[attr::kOpacity] = g.opacity_logit;
    }
    return out;
}

} // namespace jga
