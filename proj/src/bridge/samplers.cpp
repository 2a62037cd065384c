#include "jga/bridge/samplers.hpp"

#include <cmath>
#include <string>

namespace jga {
namespace {

void check_bounded(const Tensor& x, double bound, double t) {
    bool bad = false;
    double worst = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double v = x.data()[i];
        if (!std::isfinite(v) || std::abs(v) > bound) bad = true;
        if (std::isfinite(v)) worst = std::max(worst, std::abs(v));
    }
    if (bad)
        throw Error("sampler diverged at t=" + std::to_string(t) +
                    " max|x|=" + std::to_string(worst));
}

// Backward drift: stepping t -> t - dt moves x by dt * drift.
Tensor ode_drift(ScoreFn& score, const Tensor& x, const Tensor& y, double t,
                 const BridgeSchedule& sched, double guidance) {
    Tensor u = score.score(x, t);
    Tensor h = h_transform(x, t, y, sched);
    double g2 = sched.g2(t);
    Tensor d = Tensor::zeros_like(x);
    for (size_t i = 0; i < d.size(); ++i)
        d.data()[i] = g2 * (0.5 * guidance * u.data()[i] - h.data()[i]);
    return d;
}

} // namespace

Tensor sample_reverse_sde(ScoreFn& score, const Tensor& y, const BridgeSchedule& sched,
                          const SamplerConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<double> ts = sched.time_grid(cfg.steps);
    int n_churn = int(std::ceil(cfg.churn_step_ratio * cfg.steps));
    double s2T = sched.sigma2(sched.T);

    Tensor x = y;
    for (int i = 0; i < cfg.steps; ++i) {
        double t = ts[i];
        double t_next = ts[i + 1];

        if (i < n_churn) {
            double t_churn = t + cfg.churn_fraction * (t - t_next);
            t_churn = std::min(t_churn, 0.5 * (t + sched.T));
            double s2t = sched.sigma2(t);
            double s2c = sched.sigma2(t_churn);
            double ap = (s2c - s2t) / (s2T - s2t);
            double sd = std::sqrt(ap * (s2T - s2c));
            for (size_t k = 0; k < x.size(); ++k)
                x.data()[k] += ap * (y.data()[k] - x.data()[k]) + sd * rng.normal();
            t = t_churn;
        }

        double dt = t - t_next;
        Tensor u = score.score(x, t);
        Tensor h = h_transform(x, t, y, sched);
        double g2 = sched.g2(t);
        double sd = std::sqrt(g2 * dt);
        for (size_t k = 0; k < x.size(); ++k)
            x.data()[k] += dt * g2 * (cfg.guidance * u.data()[k] - h.data()[k]) +
                           sd * rng.normal();
        check_bounded(x, cfg.divergence_bound, t_next);
    }
    return x;
}

Tensor sample_probability_flow_ode(ScoreFn& score, const Tensor& y,
                                   const BridgeSchedule& sched, const SamplerConfig& cfg) {
    cfg.validate();
    std::vector<double> ts = sched.time_grid(cfg.steps);

    Tensor x = y;
    for (int i = 0; i < cfg.steps; ++i) {
        double t = ts[i];
        double t_next = ts[i + 1];
        double dt = t - t_next;

        Tensor d1 = ode_drift(score, x, y, t, sched, cfg.guidance);
        Tensor xp = x;
        for (size_t k = 0; k < x.size(); ++k) xp.data()[k] += dt * d1.data()[k];
        Tensor d2 = ode_drift(score, xp, y, t_next, sched, cfg.guidance);
        for (size_t k = 0; k < x.size(); ++k)
            x.data()[k] += 0.5 * dt * (d1.data()[k] + d2.data()[k]);
        check_bounded(x, cfg.divergence_bound, t_next);
    }
    return x;
}

} // namespace jga
