#pragma once

#include <array>
#include <memory>

#include "jga/core/voxel.hpp"
#include "jga/nn/networks.hpp"

namespace jga {

struct VaeConfig {
    int resolution = 64;     // input grid side R; latent side is R/8
    int latent_channels = 4; // F
    int attr_channels = attr::kCount;
    // Channel widths from finest to coarsest level.
    std::array<int, 4> widths = {12, 16, 24, 24};
    LossWeights weights;
    int warmup_iters = 500; // attr/render losses are off before this
    std::size_t max_voxels = 1u << 22;

    int latent_resolution() const { return resolution / 8; }
    void validate() const {
        check(resolution >= 16 && resolution % 8 == 0,
              "vae resolution must be a multiple of 8 and at least 16");
        check(latent_channels >= 1, "latent channels must be at least 1");
        weights.validate();
    }
};

struct LatentDistribution {
    LatentGrid mean;                // [r,r,r,F]
    LatentGrid logvar;              // [r,r,r,F]
    std::vector<std::uint8_t> mask; // r^3, x-major like LatentGrid
};

enum class PruneMode {
    kPredicted,     // sigmoid(logit) > 0.5, inference behavior
    kTeacherForced, // keep exactly the downsampled ground-truth set
    kKeepAll,       // no pruning; coordinate-union diagnostics
};

struct DecodeStage {
    SparseVoxelTensor pre_prune; // stage features before pruning
    std::vector<double> logits;  // occupancy logit per pre_prune row
    std::vector<char> keep;
    bool all_pruned = false;
};

struct DecodeResult {
    SparseVoxelTensor attrs; // resolution R, attribute channels
    std::vector<DecodeStage> stages; // coarse to fine
};

struct ViewTarget {
    Camera camera;
    Image image;
};

// Sparse VAE: three stride-2 residual stages down to the latent grid, and a
// generative-transpose decoder that regrows coordinates stage by stage,
// pruning with predicted occupancy.
class VaeModel {
public:
    VaeModel(const VaeConfig& cfg, std::uint64_t seed);

    const VaeConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    LatentDistribution encode(const SparseVoxelTensor& x);
    // Dense gradients w.r.t. mean and logvar; only masked cells are read.
    void encode_backward(const LatentGrid& dmean, const LatentGrid& dlogvar);

    // gt is required for kTeacherForced (supplies the per-stage keep sets).
    DecodeResult decode(const LatentGrid& z, PruneMode mode,
                        const SparseVoxelTensor* gt = nullptr);
    // d_attrs aligns with the last decode's final rows, stage_dlogits with
    // each stage's pre_prune rows. Returns the gradient w.r.t. z's feature
    // channels (occupancy channel carries none).
    LatentGrid decode_backward(const SparseVoxelTensor& d_attrs,
                               const std::vector<std::vector<double>>& stage_dlogits);

private:
    VaeConfig cfg_;
    ParamStore params_;

    // Encoder, finest to coarsest.
    std::unique_ptr<SparseConv3d> enc_stem_;
    std::vector<std::unique_ptr<SparseResBlock>> enc_res_;
    std::vector<std::unique_ptr<SparseConv3d>> enc_down_;
    std::unique_ptr<SparseResBlock> enc_post_;
    std::unique_ptr<SparseGroupNorm> enc_norm_;
    SparseSiLU enc_act_;
    std::unique_ptr<SparseConv3d> enc_head_;
    SparseVoxelTensor enc_out_;

    // Decoder, coarsest to finest.
    std::unique_ptr<SparseConv3d> dec_stem_;
    std::unique_ptr<SparseResBlock> dec_post_;
    std::vector<std::unique_ptr<GenSparseTransposeConv3d>> dec_up_;
    std::vector<std::unique_ptr<SparseResBlock>> dec_res_;
    std::vector<std::unique_ptr<SparseConv3d>> dec_occ_;
    std::unique_ptr<SparseGroupNorm> dec_head_norm_;
    SparseSiLU dec_head_act_;
    std::unique_ptr<SparseConv3d> dec_head_;
    std::vector<PruneResult> dec_prunes_;
    std::vector<SparseVoxelTensor> dec_pre_;
    SparseVoxelTensor dec_in_;
};

// z = mean + exp(logvar/2) * eps on active cells; occupancy channel = mask.
LatentGrid reparameterize(const LatentDistribution& d, Rng& rng,
                          LatentGrid* eps_out = nullptr);

// Active-coordinate keys of gt floor-divided to the given resolution.
std::unordered_map<std::uint64_t, char> coord_keys_at(const SparseVoxelTensor& gt,
                                                      int resolution);

} // namespace jga
