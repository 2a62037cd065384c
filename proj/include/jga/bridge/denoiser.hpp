#pragma once

#include <cstdint>
#include <memory>

#include "jga/bridge/schedule.hpp"
#include "jga/nn/networks.hpp"

namespace jga {

Tensor grid_tensor(const LatentGrid& grid);
LatentGrid tensor_grid(const Tensor& t);

struct DenoiserConfig {
    int state_channels = 0; // F plus the occupancy channel
    int width = 32;
    int temb_dim = 64;
    // Prior std of the endpoint displacement x0 - y, feeding the output
    // preconditioner; the pipeline estimates it from the training pairs.
    double sigma_disp = 0.5;

    void validate() const {
        check(state_channels >= 1 && width >= 1 && temb_dim >= 2, "bad denoiser config");
        check(sigma_disp > 0, "sigma_disp must be positive");
    }
};

// Score network over dense latent states. The U-Net sees the channel concat
// (x_t, y, cond) and predicts a preconditioned denoised-state residual F:
//   x0_hat = x_t + c_out(t) * F,   c_out(t) = sqrt(a(t)^2 sigma_disp^2 + variance(t)),
// whose regression target has unit variance over the whole time range. The
// score estimate follows from the marginal mean built on x0_hat:
//   U_theta = (a y + (1-a) x0_hat - x_t) / variance(t).
// The (1-a) c_out / variance factor in front of F stays O(1) near both
// endpoints, so an O(1) network error never explodes the drift; a raw
// residual-over-sqrt(variance) head amplifies its error by 1/sqrt(variance)
// at t -> T and diverges in practice.
class DenoiserModel {
public:
    DenoiserModel(const DenoiserConfig& cfg, std::uint64_t seed);

    Tensor forward(const Tensor& x_t, const Tensor& y, const Tensor& cond, double t);
    void backward(const Tensor& d_out);

    double c_out(double t, const BridgeSchedule& sched) const;
    void set_sigma_disp(double s) {
        check(s > 0, "sigma_disp must be positive");
        cfg_.sigma_disp = s;
    }

    Tensor score(const Tensor& x_t, const Tensor& y, const Tensor& cond, double t,
                 const BridgeSchedule& sched);

    ParamStore& params() { return ps_; }
    const DenoiserConfig& config() const { return cfg_; }

private:
    DenoiserConfig cfg_;
    ParamStore ps_;
    std::unique_ptr<DenseUNet> net_;
};

// Score estimate bound to one sampling problem; samplers only see this.
class ScoreFn {
public:
    virtual ~ScoreFn() = default;
    virtual Tensor score(const Tensor& x, double t) = 0;
};

class DenoiserScore : public ScoreFn {
public:
    DenoiserScore(DenoiserModel& model, Tensor y, Tensor cond, BridgeSchedule sched)
        : model_(model), y_(std::move(y)), cond_(std::move(cond)), sched_(sched) {}

    Tensor score(const Tensor& x, double t) override {
        return model_.score(x, y_, cond_, t, sched_);
    }

private:
    DenoiserModel& model_;
    Tensor y_, cond_;
    BridgeSchedule sched_;
};

} // namespace jga
