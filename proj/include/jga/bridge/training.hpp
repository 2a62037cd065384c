#pragma once

#include <vector>

#include "jga/bridge/denoiser.hpp"
#include "jga/bridge/schedule.hpp"

namespace jga {

struct BridgeBatchItem {
    Tensor x0;   // complete latent, occupancy channel included
    Tensor y;    // densified partial latent
    Tensor cond; // body-prior latent
};

// Time-weighted score matching loss w(t) * mean((u - target)^2); w(t) equals
// the bridge variance, so the effective regression target is the
// standardized residual and stays O(1) near the endpoints.
double bridge_training_loss(const Tensor& u, const Tensor& target_score, double t,
                            const BridgeSchedule& sched);

// One optimization step's worth of gradients: per item draws t and x_t,
// regresses the denoiser onto the closed-form score, accumulates parameter
// gradients (caller applies the optimizer). Returns the batch-mean loss.
double bridge_train_step(DenoiserModel& model, const std::vector<BridgeBatchItem>& batch,
                         const BridgeSchedule& sched, Rng& rng);

} // namespace jga
