#include "jga/core/grid.hpp"

#include <algorithm>
#include <numeric>

namespace jga {

void SparseVoxelTensor::push(const Coord& c, const double* feat) {
    coords_.push_back(c);
    features_.insert(features_.end(), feat, feat + channels_);
    finalized_ = false;
}

void SparseVoxelTensor::push_zero(const Coord& c) {
    coords_.push_back(c);
    features_.resize(features_.size() + channels_, 0.0);
    finalized_ = false;
}

void SparseVoxelTensor::finalize() {
    std::vector<std::size_t> order(coords_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return coord_less(coords_[a], coords_[b]);
    });

    std::vector<Coord> sorted_coords(coords_.size());
    std::vector<double> sorted_features(features_.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        sorted_coords[i] = coords_[order[i]];
        std::copy_n(features_.data() + order[i] * channels_, channels_,
                    sorted_features.data() + i * channels_);
    }
    coords_ = std::move(sorted_coords);
    features_ = std::move(sorted_features);

    index_.clear();
    index_.reserve(coords_.size());
    for (std::size_t i = 0; i < coords_.size(); ++i) {
        auto [it, inserted] = index_.emplace(coord_key(coords_[i]), static_cast<std::int64_t>(i));
        check(inserted, "duplicate voxel coordinate");
    }
    finalized_ = true;
}

std::int64_t SparseVoxelTensor::find(const Coord& c) const {
    check(finalized_, "find on non-finalized sparse tensor");
    auto it = index_.find(coord_key(c));
    return it == index_.end() ? -1 : it->second;
}

void SparseVoxelTensor::clear() {
    coords_.clear();
    features_.clear();
    index_.clear();
    finalized_ = true;
}

SparseVoxelTensor SparseVoxelTensor::aligned(const SparseVoxelTensor& ref, int channels) {
    check(ref.finalized(), "aligned requires a finalized reference");
    SparseVoxelTensor out(ref.resolution_, channels);
    out.coords_ = ref.coords_;
    out.index_ = ref.index_;
    out.features_.assign(ref.coords_.size() * channels, 0.0);
    out.finalized_ = true;
    return out;
}

LatentGrid densify(const SparseVoxelTensor& sparse) {
    check(sparse.finalized(), "densify requires a finalized sparse tensor");
    int r = sparse.resolution();
    int c = sparse.channels();
    LatentGrid grid(r, c + 1);
    for (std::size_t i = 0; i < sparse.size(); ++i) {
        const Coord& co = sparse.coord(i);
        check(co[0] >= 0 && co[0] < r && co[1] >= 0 && co[1] < r && co[2] >= 0 && co[2] < r,
              "sparse coordinate outside grid");
        const double* f = sparse.feature(i);
        std::size_t base = grid.offset(co[0], co[1], co[2]);
        for (int k = 0; k < c; ++k) grid.data()[base + k] = f[k];
        grid.data()[base + c] = 1.0;
    }
    return grid;
}

SparseVoxelTensor sparsify(const LatentGrid& grid, double occupancy_threshold) {
    check(grid.channels() >= 2, "sparsify needs at least one feature channel plus occupancy");
    int r = grid.resolution();
    int c = grid.channels() - 1;
    SparseVoxelTensor out(r, c);
    for (int x = 0; x < r; ++x)
        for (int y = 0; y < r; ++y)
            for (int z = 0; z < r; ++z) {
                std::size_t base = grid.offset(x, y, z);
                if (grid.data()[base + c] > occupancy_threshold)
                    out.push({x, y, z}, grid.data().data() + base);
            }
    out.finalize();
    return out;
}

} // namespace jga
