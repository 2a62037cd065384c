#pragma once

#include <vector>

#include "jga/core/grid.hpp"
#include "jga/nn/rng.hpp"
#include "jga/nn/tensor.hpp"

namespace jga {

// Variance-exploding bridge: zero drift, sigma(t) = t, terminal time 1.
// All closed forms below follow from the Brownian bridge in the time change
// lambda = sigma^2.
struct BridgeSchedule {
    double T = 1.0;
    double t_min = 1e-4;

    double sigma2(double t) const { return t * t; }
    double g2(double t) const { return 2.0 * t; } // d sigma^2 / dt

    // Interpolation weight toward the endpoint y.
    double a(double t) const { return sigma2(t) / sigma2(T); }
    double variance(double t) const {
        return sigma2(t) * (sigma2(T) - sigma2(t)) / sigma2(T);
    }
    // Training weight w(t).
    double weight(double t) const { return variance(t); }

    void validate() const {
        check(T > 0 && t_min > 0 && t_min < T / 2, "bad bridge schedule bounds");
    }

    // n+1 times from T - t_min down to t_min, uniform in log SNR
    // log(sigma^2 / (sigma^2(T) - sigma^2)). Geometric refinement near both
    // endpoints keeps the integrators second-order there.
    std::vector<double> time_grid(int n) const;
};

struct BridgeMoments {
    Tensor mean;
    double variance = 0;
};

// Moments of the pinned marginal q(x_t | x_0, x_T = y).
BridgeMoments bridge_marginal(const Tensor& x0, const Tensor& y, double t,
                              const BridgeSchedule& sched);

Tensor sample_bridge(const Tensor& x0, const Tensor& y, double t,
                     const BridgeSchedule& sched, Rng& rng);

// Exact gradient of log q(x_t | x_0, x_T = y); t strictly inside (0, T).
Tensor bridge_score(const Tensor& x_t, const Tensor& x0, const Tensor& y, double t,
                    const BridgeSchedule& sched);

// Doob drift adjustment (y - x) / (sigma^2(T) - sigma^2(t)).
Tensor h_transform(const Tensor& x, double t, const Tensor& y, const BridgeSchedule& sched);

struct BinarizeResult {
    LatentGrid grid;
    bool empty = false;
};

// Thresholds the trailing occupancy channel at 0.5 and zeroes features on
// inactive cells; x0 is a [r,r,r,F+1] state.
BinarizeResult occupancy_binarize(const Tensor& x0);

} // namespace jga
