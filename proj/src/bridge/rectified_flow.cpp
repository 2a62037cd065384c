#include "jga/bridge/rectified_flow.hpp"

#include <cmath>

namespace jga {

double rf_train_step(DenoiserModel& model, const std::vector<BridgeBatchItem>& batch,
                     Rng& rng) {
    check(!batch.empty(), "empty flow batch");
    model.params().zero_grad();

    double total = 0;
    for (const BridgeBatchItem& item : batch) {
        check(item.x0.same_shape(item.y) && item.x0.same_shape(item.cond),
              "batch latents must share grid dims");
        double t = rng.uniform();
        Tensor x_t = Tensor::zeros_like(item.x0);
        for (size_t i = 0; i < x_t.size(); ++i)
            x_t.data()[i] = (1.0 - t) * item.x0.data()[i] + t * item.y.data()[i];

        Tensor v = model.forward(x_t, item.y, item.cond, t);
        double inv_n = 1.0 / double(v.size());
        Tensor dv = Tensor::zeros_like(v);
        double loss = 0;
        for (size_t i = 0; i < v.size(); ++i) {
            double d = v.data()[i] - (item.x0.data()[i] - item.y.data()[i]);
            loss += d * d * inv_n;
            dv.data()[i] = 2.0 * d * inv_n / double(batch.size());
        }
        if (!std::isfinite(loss))
            throw Error("flow training loss is not finite at t=" + std::to_string(t));
        model.backward(dv);
        total += loss;
    }
    return total / double(batch.size());
}

Tensor rf_sample(VelocityFn& velocity, const Tensor& y, int steps) {
    check(steps >= 1, "flow sampler needs at least one step");
    double dt = 1.0 / steps;
    Tensor x = y;
    for (int i = 0; i < steps; ++i) {
        double t = 1.0 - i * dt;
        Tensor v = velocity.velocity(x, t);
        for (size_t k = 0; k < x.size(); ++k) x.data()[k] += dt * v.data()[k];
        check(x.all_finite(), "flow sampler produced a non-finite state");
    }
    return x;
}

} // namespace jga
