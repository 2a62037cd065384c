#pragma once

#include "jga/core/grid.hpp"
#include "jga/nn/params.hpp"

namespace jga {

// Convolution over active voxels only. stride 1 takes an odd kernel with
// optional dilation and preserves the coordinate set; stride 2 takes kernel 2
// and emits the distinct floor-halved coordinates, sampling input at 2o+d.
class SparseConv3d {
public:
    SparseConv3d(ParamStore& ps, const std::string& name, int in_ch, int out_ch,
                 int kernel, int stride, int dilation, Rng& rng, bool zero_init = false);

    SparseVoxelTensor forward(const SparseVoxelTensor& x);
    // dy must be aligned with the last forward's output rows.
    SparseVoxelTensor backward(const SparseVoxelTensor& dy);

    int out_ch() const { return out_ch_; }

private:
    Param* w_;
    Param* b_;
    int in_ch_, out_ch_, k_, stride_, dil_;
    SparseVoxelTensor x_;
    std::vector<std::int64_t> taps_; // [n_out * k^3] input row per tap, -1 if absent
};

// Transpose convolution that generates its output coordinate set from the
// input coordinates alone (no cached coordinates): stride 2 kernel 2 emits
// the union of 2c+d footprints; stride 1 odd kernel emits the dilated
// neighborhood union. Output voxel count above max_voxels is an error.
class GenSparseTransposeConv3d {
public:
    GenSparseTransposeConv3d(ParamStore& ps, const std::string& name, int in_ch, int out_ch,
                             int kernel, int stride, Rng& rng, bool zero_init = false,
                             std::size_t max_voxels = 1u << 22);

    SparseVoxelTensor forward(const SparseVoxelTensor& x);
    SparseVoxelTensor backward(const SparseVoxelTensor& dy);

    // Coordinate generation alone; used by forward and directly testable.
    static std::vector<Coord> generate_coords(const std::vector<Coord>& in, int kernel,
                                              int stride);

private:
    Param* w_;
    Param* b_;
    int in_ch_, out_ch_, k_, stride_;
    std::size_t max_voxels_;
    SparseVoxelTensor x_;
    std::vector<std::int64_t> taps_; // [n_in * k^3] output row per tap
    std::size_t n_out_ = 0;
};

class SparseGroupNorm {
public:
    SparseGroupNorm(ParamStore& ps, const std::string& name, int channels, int groups);

    SparseVoxelTensor forward(const SparseVoxelTensor& x);
    SparseVoxelTensor backward(const SparseVoxelTensor& dy);

private:
    Param* gamma_;
    Param* beta_;
    int channels_, groups_;
    SparseVoxelTensor xhat_;
    std::vector<double> inv_std_;
};

class SparseSiLU {
public:
    SparseVoxelTensor forward(const SparseVoxelTensor& x);
    SparseVoxelTensor backward(const SparseVoxelTensor& dy);

private:
    SparseVoxelTensor x_;
};

// Occupancy-gated voxel dropping. Keeps rows whose sigmoid(logit) exceeds the
// threshold (or whose mask flag is set); gradients route straight through to
// kept rows and the logits receive none from downstream.
struct PruneResult {
    SparseVoxelTensor kept;
    std::vector<std::int64_t> src_rows; // kept row -> input row
    bool all_pruned = false;
};

PruneResult prune(const SparseVoxelTensor& x, const std::vector<double>& logits,
                  double threshold = 0.5);
PruneResult prune_mask(const SparseVoxelTensor& x, const std::vector<char>& keep);
// Scatters dy (aligned with result.kept) back onto x's rows.
SparseVoxelTensor prune_backward(const SparseVoxelTensor& x, const PruneResult& result,
                                 const SparseVoxelTensor& dy);

} // namespace jga
