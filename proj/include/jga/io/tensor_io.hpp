#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jga/core/grid.hpp"

namespace jga {

// "JGAT" container: u32 rank, u64 dims, float32 little-endian payload.
struct TensorBlob {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;

    std::size_t numel() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

std::string tensor_bytes(const TensorBlob& blob);
// Streaming parse: pos advances past one container.
TensorBlob parse_tensor_at(const std::string& bytes, std::size_t& pos);
TensorBlob parse_tensor(const std::string& bytes);

void write_tensor_file(const TensorBlob& blob, const std::string& path);
TensorBlob read_tensor_file(const std::string& path);

// LatentGrid convenience: dims [r, r, r, C].
void write_latent(const LatentGrid& grid, const std::string& path);
LatentGrid read_latent(const std::string& path);

// Sparse voxels as [N, 3+C] rows: integer coords (exact in f32) + features.
// The resolution travels in a leading [resolution, channels] descriptor row.
void write_voxels(const SparseVoxelTensor& voxels, const std::string& path);
SparseVoxelTensor read_voxels(const std::string& path);

} // namespace jga
