#pragma once

#include <memory>

#include "jga/nn/layers.hpp"
#include "jga/nn/sparse_ops.hpp"

namespace jga {

// [sin(w_i t), cos(w_i t)] with frequencies log-spaced in [1, 1000].
std::vector<double> sinusoidal_embedding(double t, int dim);

// Sinusoid followed by a two-layer MLP; produces the shared conditioning
// vector consumed by residual blocks.
class TimeEmbedding {
public:
    TimeEmbedding(ParamStore& ps, const std::string& name, int sin_dim, int hidden, Rng& rng);

    std::vector<double> forward(double t);
    void backward(const std::vector<double>& dh);

    int hidden() const { return hidden_; }

private:
    int sin_dim_, hidden_;
    Linear l1_, l2_;
    std::vector<double> pre_act_;
};

// Pre-activation residual block; second conv starts at zero so the block is
// born an identity. Optional per-channel shift from a time embedding.
class DenseResBlock {
public:
    DenseResBlock(ParamStore& ps, const std::string& name, int channels, int temb_dim,
                  Rng& rng);

    Tensor forward(const Tensor& x, const std::vector<double>& temb);
    // dtemb, when non-null, accumulates the gradient w.r.t. the embedding.
    Tensor backward(const Tensor& dy, std::vector<double>* dtemb);

private:
    GroupNorm gn1_, gn2_;
    SiLU act1_, act2_;
    DenseConv3d conv1_, conv2_;
    std::unique_ptr<Linear> time_proj_;
};

struct DenseUNetConfig {
    int in_ch = 0;
    int out_ch = 0;
    int width = 32;
    int temb_dim = 64;
};

// One-level U-Net with additive skip: conv-in, block, downsample x2, two
// blocks, upsample, block, normalized projection head (zero-init).
class DenseUNet {
public:
    DenseUNet(ParamStore& ps, const std::string& name, const DenseUNetConfig& cfg, Rng& rng);

    Tensor forward(const Tensor& x, double t);
    Tensor backward(const Tensor& dy);

    const DenseUNetConfig& config() const { return cfg_; }

private:
    DenseUNetConfig cfg_;
    TimeEmbedding temb_;
    DenseConv3d conv_in_;
    DenseResBlock block1_;
    DenseConv3d down_;
    DenseResBlock block2_, block3_;
    UpsampleNearest2x up_;
    DenseConv3d up_conv_;
    DenseResBlock block4_;
    GroupNorm out_norm_;
    SiLU out_act_;
    DenseConv3d conv_out_;
};

// Pre-activation residual block. The light variant drops the second conv
// (its single conv starts at zero) for levels where active sets are large.
class SparseResBlock {
public:
    SparseResBlock(ParamStore& ps, const std::string& name, int channels, int dilation,
                   Rng& rng, bool light = false);

    SparseVoxelTensor forward(const SparseVoxelTensor& x);
    SparseVoxelTensor backward(const SparseVoxelTensor& dy);

private:
    bool light_;
    SparseGroupNorm gn1_;
    SparseSiLU act1_, act2_;
    SparseConv3d conv1_;
    std::unique_ptr<SparseGroupNorm> gn2_;
    std::unique_ptr<SparseConv3d> conv2_;
};

struct SparseResNetConfig {
    int in_ch = 0;
    int out_ch = 0;
    int width = 24;
    int blocks = 4;
    bool zero_init_head = false;
};

// Coordinate-preserving stack: stem conv, residual blocks with dilation
// cycling 1,2,1,2,..., normalized projection head. Output coordinates always
// equal input coordinates.
class SparseResNet {
public:
    SparseResNet(ParamStore& ps, const std::string& name, const SparseResNetConfig& cfg,
                 Rng& rng);

    SparseVoxelTensor forward(const SparseVoxelTensor& x);
    SparseVoxelTensor backward(const SparseVoxelTensor& dy);

    const SparseResNetConfig& config() const { return cfg_; }

private:
    SparseResNetConfig cfg_;
    SparseConv3d stem_;
    std::vector<std::unique_ptr<SparseResBlock>> blocks_;
    SparseGroupNorm head_norm_;
    SparseSiLU head_act_;
    SparseConv3d head_;
};

} // namespace jga
