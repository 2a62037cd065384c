#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "jga/common.hpp"

namespace jga {

using Coord = std::array<std::int32_t, 3>;

inline bool coord_less(const Coord& a, const Coord& b) {
    if (a[0] != b[0]) return a[0] < b[0];
    if (a[1] != b[1]) return a[1] < b[1];
    return a[2] < b[2];
}

// Packs a coordinate into one table key. Each component gets 21 bits with a
// 2^20 bias, enough for any resolution this project touches.
inline std::uint64_t coord_key(const Coord& c) {
    auto u = [](std::int32_t v) {
        return static_cast<std::uint64_t>(static_cast<std::int64_t>(v) + (1 << 20)) &
               ((1ull << 21) - 1);
    };
    return (u(c[0]) << 42) | (u(c[1]) << 21) | u(c[2]);
}

// Sparse set of occupied voxels, each carrying a fixed-width feature vector.
// Voxel order is canonical (lexicographic by coordinate) after finalize(),
// which every consumer relies on for determinism.
class SparseVoxelTensor {
public:
    SparseVoxelTensor() = default;
    SparseVoxelTensor(int resolution, int channels)
        : resolution_(resolution), channels_(channels) {}

    int resolution() const { return resolution_; }
    int channels() const { return channels_; }
    std::size_t size() const { return coords_.size(); }
    bool empty() const { return coords_.empty(); }

    const std::vector<Coord>& coords() const { return coords_; }
    const std::vector<double>& features() const { return features_; }
    std::vector<double>& features() { return features_; }

    const Coord& coord(std::size_t i) const { return coords_[i]; }
    double* feature(std::size_t i) { return features_.data() + i * channels_; }
    const double* feature(std::size_t i) const { return features_.data() + i * channels_; }

    // Appends a voxel; call finalize() before lookups or iteration-order use.
    void push(const Coord& c, const double* feat);
    void push_zero(const Coord& c);

    // Sorts voxels into canonical order and rebuilds the lookup index.
    // Duplicate coordinates are an error.
    void finalize();

    bool finalized() const { return finalized_; }
    // Returns the voxel index for a coordinate, or -1.
    std::int64_t find(const Coord& c) const;

    void clear();

    // Zero-feature tensor sharing ref's coordinates, order and index.
    static SparseVoxelTensor aligned(const SparseVoxelTensor& ref, int channels);

private:
    int resolution_ = 0;
    int channels_ = 0;
    bool finalized_ = true;
    std::vector<Coord> coords_;
    std::vector<double> features_;
    std::unordered_map<std::uint64_t, std::int64_t> index_;
};

// Dense low-resolution grid of latent feature vectors, channel-last layout
// [r, r, r, C]. Channel layout for pipeline latents is F feature channels
// followed by one occupancy channel.
class LatentGrid {
public:
    LatentGrid() = default;
    LatentGrid(int resolution, int channels, double fill = 0.0)
        : resolution_(resolution), channels_(channels),
          data_(static_cast<std::size_t>(resolution) * resolution * resolution * channels,
                fill) {}

    int resolution() const { return resolution_; }
    int channels() const { return channels_; }
    std::size_t voxel_count() const {
        return static_cast<std::size_t>(resolution_) * resolution_ * resolution_;
    }
    std::size_t size() const { return data_.size(); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::size_t offset(int x, int y, int z, int c = 0) const {
        return ((static_cast<std::size_t>(x) * resolution_ + y) * resolution_ + z) *
                   channels_ +
               c;
    }
    double& at(int x, int y, int z, int c) { return data_[offset(x, y, z, c)]; }
    double at(int x, int y, int z, int c) const { return data_[offset(x, y, z, c)]; }

private:
    int resolution_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

// Converts between the dense grid and its sparse view. densify writes voxel
// features into a zero grid and sets the trailing occupancy channel to 1;
// sparsify keeps voxels whose occupancy channel exceeds the threshold and
// strips that channel.
LatentGrid densify(const SparseVoxelTensor& sparse);
SparseVoxelTensor sparsify(const LatentGrid& grid, double occupancy_threshold = 0.5);

} // namespace jga
