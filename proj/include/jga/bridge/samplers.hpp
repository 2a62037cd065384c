#pragma once

#include "jga/bridge/denoiser.hpp"
#include "jga/bridge/schedule.hpp"

namespace jga {

struct SamplerConfig {
    int steps = 40;
    double churn_step_ratio = 0.1;
    // A churn sub-step re-noises from t to t + churn_fraction * (t - t_next)
    // through the forward bridge kernel before the reverse step.
    double churn_fraction = 0.5;
    double guidance = 1.0;
    double divergence_bound = 1e6;

    void validate() const {
        check(steps >= 1, "sampler needs at least one step");
        check(churn_step_ratio >= 0 && churn_step_ratio <= 1, "churn ratio outside [0,1]");
        check(churn_fraction > 0 && churn_fraction < 1, "churn fraction outside (0,1)");
        check(divergence_bound > 0, "divergence bound must be positive");
    }
};

// Euler-Maruyama on the reverse bridge SDE from T - t_min down to t_min,
// started at the endpoint y. Churn applies to the first
// ceil(churn_step_ratio * steps) iterations.
Tensor sample_reverse_sde(ScoreFn& score, const Tensor& y, const BridgeSchedule& sched,
                          const SamplerConfig& cfg, Rng& rng);

// Deterministic Heun integration of the probability flow ODE (half-score
// drift). Churn settings are ignored.
Tensor sample_probability_flow_ode(ScoreFn& score, const Tensor& y,
                                   const BridgeSchedule& sched, const SamplerConfig& cfg);

} // namespace jga
