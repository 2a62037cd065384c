#include "jga/bridge/training.hpp"

#include <cmath>

namespace jga {

double bridge_training_loss(const Tensor& u, const Tensor& target_score, double t,
                            const BridgeSchedule& sched) {
    check(u.same_shape(target_score), "score shapes differ");
    double acc = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        double d = u.data()[i] - target_score.data()[i];
        acc += d * d;
    }
    return sched.weight(t) * acc / double(u.size());
}

double bridge_train_step(DenoiserModel& model, const std::vector<BridgeBatchItem>& batch,
                         const BridgeSchedule& sched, Rng& rng) {
    check(!batch.empty(), "empty bridge batch");
    model.params().zero_grad();

    double total = 0;
    for (const BridgeBatchItem& item : batch) {
        check(item.x0.same_shape(item.y) && item.x0.same_shape(item.cond),
              "batch latents must share grid dims");
        double t = rng.uniform(sched.t_min, sched.T - sched.t_min);
        BridgeMoments m = bridge_marginal(item.x0, item.y, t, sched);
        double sd = std::sqrt(m.variance);
        Tensor x_t = m.mean;
        for (size_t i = 0; i < x_t.size(); ++i) x_t.data()[i] += sd * rng.normal();

        // With the preconditioned head, U_theta - score = k (F - F_target)
        // for k = (1-a) c_out / variance and F_target = (x0 - x_t) / c_out,
        // so w(t) * (U - score)^2 collapses to the bounded weight
        // w(t) k^2 <= 1 + sigma_disp^2 / 4 times a unit-variance regression.
        Tensor f = model.forward(x_t, item.y, item.cond, t);
        double a = sched.a(t);
        double co = model.c_out(t, sched);
        double k = (1 - a) * co / m.variance;
        double wk2 = sched.weight(t) * k * k;
        double inv_n = 1.0 / double(f.size());
        Tensor de = Tensor::zeros_like(f);
        double loss = 0;
        for (size_t i = 0; i < f.size(); ++i) {
            double target = (item.x0.data()[i] - x_t.data()[i]) / co;
            double d = f.data()[i] - target;
            loss += wk2 * d * d * inv_n;
            de.data()[i] = wk2 * 2.0 * d * inv_n / double(batch.size());
        }
        if (!std::isfinite(loss))
            throw Error("bridge training loss is not finite at t=" + std::to_string(t));
        model.backward(de);
        total += loss;
    }
    return total / double(batch.size());
}

} // namespace jga
