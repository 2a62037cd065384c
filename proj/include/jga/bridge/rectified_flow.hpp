#pragma once

#include <vector>

#include "jga/bridge/training.hpp"

namespace jga {

// Straight-path transport baseline: x_t = (1-t) x0 + t y, velocity target
// x0 - y, Euler integration from the partial latent back to a sample.
class VelocityFn {
public:
    virtual ~VelocityFn() = default;
    virtual Tensor velocity(const Tensor& x, double t) = 0;
};

class DenoiserVelocity : public VelocityFn {
public:
    DenoiserVelocity(DenoiserModel& model, Tensor y, Tensor cond)
        : model_(model), y_(std::move(y)), cond_(std::move(cond)) {}

    Tensor velocity(const Tensor& x, double t) override {
        return model_.forward(x, y_, cond_, t);
    }

private:
    DenoiserModel& model_;
    Tensor y_, cond_;
};

double rf_train_step(DenoiserModel& model, const std::vector<BridgeBatchItem>& batch,
                     Rng& rng);

Tensor rf_sample(VelocityFn& velocity, const Tensor& y, int steps);

} // namespace jga
