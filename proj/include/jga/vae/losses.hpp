#pragma once

#include "jga/render/rasterizer.hpp"
#include "jga/vae/vae.hpp"

namespace jga {

struct OccupancyLoss {
    double value = 0;
    std::vector<std::vector<double>> dlogits; // per stage, aligned with pre_prune rows
};

// Binary cross-entropy of each stage's occupancy prediction against the
// ground-truth coordinate set downsampled to that stage's resolution,
// averaged over the stage's active rows and summed across stages.
OccupancyLoss occupancy_loss(const DecodeResult& dec, const SparseVoxelTensor& gt);

struct AttrLoss {
    double value = 0;
    bool empty_intersection = false;
    SparseVoxelTensor dpred;
};

// Mean squared feature error over the coordinate intersection.
AttrLoss attr_loss(const SparseVoxelTensor& pred, const SparseVoxelTensor& gt);

struct KlLoss {
    double value = 0;
    LatentGrid dmean, dlogvar;
};

// Mean over active cells and channels of (mu^2 + sigma^2 - log sigma^2 - 1)/2.
KlLoss kl_loss(const LatentDistribution& d);

struct RenderLoss {
    double value = 0;
    double l1 = 0, ssim = 0; // per-view means, diagnostic
    std::vector<GaussianGrad> dgaussians;
};

// Sum over views of w.l1 * L1 + w.ssim * (1 - SSIM). The lpips weight is
// accepted but contributes nothing (no perceptual backend).
RenderLoss render_loss(const GaussianSet& pred, const std::vector<ViewTarget>& views,
                       const LossWeights& w, const RasterConfig& rc = {});

struct VaeStepLosses {
    double total = 0, kl = 0, occupancy = 0, attr = 0, render = 0;
    bool empty_intersection = false;
    double iou = 0; // predicted final-stage coordinate IoU against gt
};

// One teacher-forced training step: encode, sample, decode, all losses,
// gradients accumulated into the model parameters (no optimizer call).
// Before warmup_iters only kl and occupancy contribute.
VaeStepLosses vae_training_step(VaeModel& model, const SparseVoxelTensor& gt,
                                const std::vector<ViewTarget>& views, int iter, Rng& rng,
                                const RasterConfig& rc = {});

} // namespace jga
