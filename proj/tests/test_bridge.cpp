#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "jga/common.hpp"

#include "jga/bridge/rectified_flow.hpp"
#include "jga/bridge/samplers.hpp"
#include "jga/bridge/training.hpp"

using namespace jga;

namespace {

Tensor scalar(double v) {
    Tensor t({1});
    t[0] = v;
    return t;
}

// Exact score of the marginal q(x_t | y) when x0 ~ N(mu0, s0^2): the bridge
// mean interpolates toward mu0 and the prior widens the variance.
struct AnalyticScore : ScoreFn {
    double mu0, s0, y;
    BridgeSchedule sched;
    AnalyticScore(double mu0_, double s0_, double y_) : mu0(mu0_), s0(s0_), y(y_) {}

    Tensor score(const Tensor& x, double t) override {
        double a = sched.a(t);
        double mean = a * y + (1 - a) * mu0;
        double var = sched.variance(t) + (1 - a) * (1 - a) * s0 * s0;
        Tensor out = Tensor::zeros_like(x);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = (mean - x[i]) / var;
        return out;
    }
};

struct PerfectBridgeScore : ScoreFn {
    Tensor x0, y;
    BridgeSchedule sched;
    Tensor score(const Tensor& x, double t) override {
        return bridge_score(x, x0, y, t, sched);
    }
};

struct StraightVelocity : VelocityFn {
    Tensor x0, y;
    Tensor velocity(const Tensor&, double) override {
        Tensor v = Tensor::zeros_like(x0);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = x0[i] - y[i];
        return v;
    }
};

} // namespace

TEST_CASE("bridge marginal pins both endpoints") {
    BridgeSchedule sched;
    Tensor x0 = scalar(-0.7), y = scalar(1.3);
    auto m0 = bridge_marginal(x0, y, 0.0, sched);
    CHECK(m0.mean[0] == doctest::Approx(-0.7));
    CHECK(m0.variance == 0.0);
    auto mT = bridge_marginal(x0, y, sched.T, sched);
    CHECK(mT.mean[0] == doctest::Approx(1.3));
    CHECK(mT.variance == 0.0);
}

TEST_CASE("bridge marginal scalar closed form at t=0.5") {
    BridgeSchedule sched;
    auto m = bridge_marginal(scalar(0.0), scalar(1.0), 0.5, sched);
    CHECK(m.mean[0] == doctest::Approx(0.25));
    CHECK(m.variance == doctest::Approx(0.1875));
}

TEST_CASE("forward Euler-Maruyama simulation reproduces the marginal moments") {
    // Pinned SDE dx = h(x,t)*g2(t) dt + sqrt(g2) dW from x0, with the exact
    // h-transform drift; the t=0.5 cloud must match the closed form.
    BridgeSchedule sched;
    Rng rng(7);
    double x0 = 0.0, y = 1.0, t_target = 0.5;
    int paths = 4000, steps = 400;
    double sum = 0, sum2 = 0;
    for (int p = 0; p < paths; ++p) {
        double x = x0, t = 0;
        double dt = t_target / steps;
        for (int s = 0; s < steps; ++s) {
            Tensor xs = scalar(x);
            Tensor h = h_transform(xs, t, scalar(y), sched);
            x += sched.g2(t) * h[0] * dt + std::sqrt(sched.g2(t) * dt) * rng.normal();
            t += dt;
        }
        sum += x;
        sum2 += x * x;
    }
    double mean = sum / paths;
    double var = sum2 / paths - mean * mean;
    auto m = bridge_marginal(scalar(x0), scalar(y), t_target, sched);
    double se_mean = std::sqrt(m.variance / paths);
    double se_var = m.variance * std::sqrt(2.0 / (paths - 1));
    CHECK(std::abs(mean - m.mean[0]) < 3 * se_mean + 2.0 / steps);
    CHECK(std::abs(var - m.variance) < 3 * se_var + 2.0 / steps);
}

TEST_CASE("bridge score matches the scalar closed form") {
    BridgeSchedule sched;
    Tensor s = bridge_score(scalar(0.0), scalar(0.0), scalar(1.0), 0.5, sched);
    CHECK(s[0] == doctest::Approx(0.25 / 0.1875));
    Tensor at_mean = bridge_score(scalar(0.25), scalar(0.0), scalar(1.0), 0.5, sched);
    CHECK(at_mean[0] == doctest::Approx(0.0));
    CHECK_THROWS_AS(bridge_score(scalar(0), scalar(0), scalar(1), 0.0, sched), Error);
    CHECK_THROWS_AS(bridge_score(scalar(0), scalar(0), scalar(1), 1.0, sched), Error);
}

TEST_CASE("bridge score equals the finite-difference log-density gradient") {
    BridgeSchedule sched;
    Rng rng(11);
    for (int c = 0; c < 100; ++c) {
        double x0 = rng.normal(), y = rng.normal() + 1.0;
        double t = rng.uniform(0.05, 0.95);
        double xt = rng.normal(0.5, 1.0);
        auto m = bridge_marginal(scalar(x0), scalar(y), t, sched);
        auto logq = [&](double x) {
            return -0.5 * (x - m.mean[0]) * (x - m.mean[0]) / m.variance;
        };
        double eps = 1e-6;
        double fd = (logq(xt + eps) - logq(xt - eps)) / (2 * eps);
        Tensor s = bridge_score(scalar(xt), scalar(x0), scalar(y), t, sched);
        CHECK(s[0] == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("h transform closed forms") {
    BridgeSchedule sched;
    Tensor h = h_transform(scalar(0.25), 0.0, scalar(1.0), sched);
    CHECK(h[0] == doctest::Approx(0.75)); // (y - x) / sigma2(T)
    Tensor hz = h_transform(scalar(1.0), 0.3, scalar(1.0), sched);
    CHECK(hz[0] == doctest::Approx(0.0));
    CHECK_THROWS_AS(h_transform(scalar(0), 1.0, scalar(1), sched), Error);
}

TEST_CASE("sample_bridge is seeded and pinned") {
    BridgeSchedule sched;
    Rng a(3), b(3);
    Tensor s1 = sample_bridge(scalar(0), scalar(1), 0.4, sched, a);
    Tensor s2 = sample_bridge(scalar(0), scalar(1), 0.4, sched, b);
    CHECK(s1[0] == s2[0]);
    Rng c(4);
    CHECK(sample_bridge(scalar(-2), scalar(1), 0.0, sched, c)[0] == -2.0);
    CHECK(sample_bridge(scalar(-2), scalar(1), 1.0, sched, c)[0] == 1.0);
}

TEST_CASE("time grid is pinned, decreasing and positive") {
    BridgeSchedule sched;
    auto ts = sched.time_grid(17);
    REQUIRE(ts.size() == 18);
    CHECK(ts.front() == sched.T - sched.t_min);
    CHECK(ts.back() == sched.t_min);
    for (std::size_t i = 1; i < ts.size(); ++i) {
        CHECK(ts[i] < ts[i - 1]);
        CHECK(ts[i] > 0);
    }
}

TEST_CASE("reverse SDE recovers the analytic posterior moments") {
    BridgeSchedule sched;
    double mu0 = -0.4, s0 = 0.35, y = 1.2;
    AnalyticScore fn(mu0, s0, y);
    SamplerConfig cfg;
    cfg.steps = 60;
    cfg.churn_step_ratio = 0.0;
    Rng rng(19);
    int runs = 4000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < runs; ++i) {
        Tensor x = sample_reverse_sde(fn, scalar(y), sched, cfg, rng);
        sum += x[0];
        sum2 += x[0] * x[0];
    }
    double mean = sum / runs;
    double var = sum2 / runs - mean * mean;
    double se_mean = s0 / std::sqrt(double(runs));
    double se_var = s0 * s0 * std::sqrt(2.0 / (runs - 1));
    // Discretization adds O(1/N) bias on top of the Monte-Carlo band.
    CHECK(std::abs(mean - mu0) < 3 * se_mean + 0.4 / cfg.steps);
    CHECK(std::abs(var - s0 * s0) < 3 * se_var + 0.4 / cfg.steps);
}

TEST_CASE("churned reverse SDE stays on the posterior") {
    BridgeSchedule sched;
    double mu0 = 0.3, s0 = 0.25, y = -0.9;
    AnalyticScore fn(mu0, s0, y);
    SamplerConfig cfg;
    cfg.steps = 60;
    cfg.churn_step_ratio = 0.25;
    Rng rng(23);
    int runs = 3000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < runs; ++i) {
        Tensor x = sample_reverse_sde(fn, scalar(y), sched, cfg, rng);
        sum += x[0];
        sum2 += x[0] * x[0];
    }
    double mean = sum / runs;
    double var = sum2 / runs - mean * mean;
    // Churn re-noises and then spans up to 1.5 sub-intervals per step, so the
    // discretization bias constant is larger than in the plain EM run.
    CHECK(std::abs(mean - mu0) < 3 * s0 / std::sqrt(double(runs)) + 0.8 / cfg.steps);
    CHECK(std::abs(var - s0 * s0) <
          3 * s0 * s0 * std::sqrt(2.0 / (runs - 1)) + 0.8 / cfg.steps);
}

TEST_CASE("churn_ratio zero draws nothing extra from the stream") {
    // A hand-rolled Euler-Maruyama loop with the same generator must track
    // the sampler bit for bit when churn is disabled.
    BridgeSchedule sched;
    AnalyticScore fn(0.1, 0.5, 0.8);
    SamplerConfig cfg;
    cfg.steps = 12;
    cfg.churn_step_ratio = 0.0;
    Rng a(31), b(31);
    Tensor got = sample_reverse_sde(fn, scalar(0.8), sched, cfg, a);

    auto ts = sched.time_grid(cfg.steps);
    Tensor x = scalar(0.8);
    for (int i = 0; i < cfg.steps; ++i) {
        double t = ts[i], dt = ts[i] - ts[i + 1];
        Tensor u = fn.score(x, t);
        Tensor h = h_transform(x, t, scalar(0.8), sched);
        double g2 = sched.g2(t);
        x[0] += dt * g2 * (cfg.guidance * u[0] - h[0]) + std::sqrt(g2 * dt) * b.normal();
    }
    CHECK(got[0] == x[0]);
}

TEST_CASE("one-step reverse SDE stays finite") {
    BridgeSchedule sched;
    AnalyticScore fn(0.0, 1.0, 5.0);
    SamplerConfig cfg;
    cfg.steps = 1;
    Rng rng(37);
    Tensor x = sample_reverse_sde(fn, scalar(5.0), sched, cfg, rng);
    CHECK(std::isfinite(x[0]));
}

TEST_CASE("probability flow ODE is deterministic and converges at 2nd order") {
    BridgeSchedule sched;
    double mu0 = -0.2, s0 = 0.4, y = 1.0;
    AnalyticScore fn(mu0, s0, y);
    SamplerConfig cfg;
    cfg.steps = 10;
    Tensor a = sample_probability_flow_ode(fn, scalar(y), sched, cfg);
    Tensor b = sample_probability_flow_ode(fn, scalar(y), sched, cfg);
    CHECK(a[0] == b[0]);

    // Reference endpoint from a very fine run; halving the step count must
    // cut the error by at least ~4 up to roundoff.
    SamplerConfig fine = cfg;
    fine.steps = 4096;
    double ref = sample_probability_flow_ode(fn, scalar(y), sched, fine)[0];
    double errs[3];
    int ns[3] = {10, 20, 40};
    for (int i = 0; i < 3; ++i) {
        SamplerConfig c2 = cfg;
        c2.steps = ns[i];
        errs[i] = std::abs(sample_probability_flow_ode(fn, scalar(y), sched, c2)[0] - ref);
    }
    CHECK(errs[0] / errs[1] > 3.0);
    CHECK(errs[1] / errs[2] > 3.0);
}

TEST_CASE("ODE endpoint agrees with the SDE population mean") {
    BridgeSchedule sched;
    double mu0 = 0.6, s0 = 0.3, y = -0.5;
    AnalyticScore fn(mu0, s0, y);
    SamplerConfig cfg;
    cfg.steps = 80;
    Tensor x = sample_probability_flow_ode(fn, scalar(y), sched, cfg);
    // The deterministic transport lands inside the posterior's bulk.
    CHECK(std::abs(x[0] - mu0) < 3 * s0);
}

TEST_CASE("diverging score aborts with diagnostics") {
    struct Explode : ScoreFn {
        Tensor score(const Tensor& x, double) override {
            Tensor s = Tensor::zeros_like(x);
            for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1e12;
            return s;
        }
    } fn;
    BridgeSchedule sched;
    SamplerConfig cfg;
    cfg.steps = 8;
    Rng rng(41);
    CHECK_THROWS_AS(sample_reverse_sde(fn, scalar(0.0), sched, cfg, rng), Error);
}

TEST_CASE("training loss vanishes for the oracle score and matches the weighting") {
    BridgeSchedule sched;
    Rng rng(43);
    Tensor x0 = scalar(0.2), y = scalar(-1.0);
    double t = 0.37;
    Tensor x_t = sample_bridge(x0, y, t, sched, rng);
    Tensor target = bridge_score(x_t, x0, y, t, sched);
    CHECK(bridge_training_loss(target, target, t, sched) == 0.0);

    Tensor off = target;
    off[0] += 2.0;
    double loss = bridge_training_loss(off, target, t, sched);
    CHECK(loss == doctest::Approx(sched.weight(t) * 4.0));
    // w(t)*(u - score)^2 is exactly the standardized-residual MSE.
    double e_diff = std::sqrt(sched.variance(t)) * 2.0;
    CHECK(loss == doctest::Approx(e_diff * e_diff));
}

TEST_CASE("bridge train step gradient matches finite differences") {
    BridgeSchedule sched;
    DenoiserConfig dc;
    dc.state_channels = 2;
    dc.width = 4;
    dc.temb_dim = 8;
    DenoiserModel model(dc, 5);
    std::vector<BridgeBatchItem> batch;
    Rng data(47);
    // The output projection starts at zero, which blocks gradient flow into
    // earlier layers; perturb every weight so the whole network is live.
    for (auto& [name, p] : model.params().all())
        for (auto& v : p.value.values()) v += 0.05 * data.normal();
    Tensor x0({4, 4, 4, 2}), y({4, 4, 4, 2}), cond({4, 4, 4, 2});
    for (auto& v : x0.values()) v = data.normal();
    for (auto& v : y.values()) v = data.normal();
    for (auto& v : cond.values()) v = data.normal();
    batch.push_back({x0, y, cond});

    auto loss_at = [&]() {
        Rng rng(301);
        return bridge_train_step(model, batch, sched, rng);
    };
    loss_at();
    int checked = 0;
    for (auto& [name, p] : model.params().all()) {
        if (checked >= 5) break;
        std::size_t idx = 0;
        for (std::size_t i = 1; i < p.grad.size(); ++i)
            if (std::abs(p.grad[i]) > std::abs(p.grad[idx])) idx = i;
        double g = p.grad[idx];
        double keep = p.value[idx];
        double eps = 1e-5;
        p.value[idx] = keep + eps;
        double lp = loss_at();
        p.value[idx] = keep - eps;
        double lm = loss_at();
        p.value[idx] = keep;
        double fd = (lp - lm) / (2 * eps);
        if (std::abs(fd) < 1e-12) continue;
        CHECK(g == doctest::Approx(fd).epsilon(1e-4));
        ++checked;
    }
    CHECK(checked >= 3);
}

TEST_CASE("bridge training loss decreases on a fixed toy set") {
    BridgeSchedule sched;
    DenoiserConfig dc;
    dc.state_channels = 2;
    dc.width = 6;
    dc.temb_dim = 8;
    DenoiserModel model(dc, 9);
    Rng data(53);
    std::vector<BridgeBatchItem> batch;
    for (int i = 0; i < 2; ++i) {
        Tensor x0({2, 2, 2, 2}), y({2, 2, 2, 2}), cond({2, 2, 2, 2});
        for (auto& v : x0.values()) v = data.normal();
        for (auto& v : y.values()) v = data.normal();
        for (auto& v : cond.values()) v = data.normal();
        batch.push_back({std::move(x0), std::move(y), std::move(cond)});
    }
    Adam opt(3e-3);
    Rng rng(59);
    double first = 0, last = 0;
    int iters = 500, window = 50;
    for (int i = 0; i < iters; ++i) {
        double l = bridge_train_step(model, batch, sched, rng);
        opt.step(model.params());
        if (i < window) first += l;
        if (i >= iters - window) last += l;
    }
    CHECK(last < first);
}

TEST_CASE("denoiser consumes the condition channels") {
    DenoiserConfig dc;
    dc.state_channels = 2;
    dc.width = 4;
    dc.temb_dim = 8;
    DenoiserModel model(dc, 13);
    Rng rng(61);
    for (auto& [name, p] : model.params().all())
        for (auto& v : p.value.values()) v += 0.05 * rng.normal();
    Tensor x({2, 2, 2, 2}), y({2, 2, 2, 2}), cond({2, 2, 2, 2});
    for (auto& v : x.values()) v = rng.normal();
    for (auto& v : y.values()) v = rng.normal();
    for (auto& v : cond.values()) v = rng.normal();
    Tensor out1 = model.forward(x, y, cond, 0.5);
    Tensor flipped = cond;
    std::reverse(flipped.values().begin(), flipped.values().end());
    Tensor out2 = model.forward(x, y, flipped, 0.5);
    double diff = 0;
    for (std::size_t i = 0; i < out1.size(); ++i) diff += std::abs(out1[i] - out2[i]);
    CHECK(diff > 0);
}

TEST_CASE("model score assembles the preconditioned head") {
    BridgeSchedule sched;
    DenoiserConfig dc;
    dc.state_channels = 2;
    dc.width = 4;
    dc.temb_dim = 8;
    dc.sigma_disp = 0.7;
    DenoiserModel model(dc, 21);
    Rng rng(83);
    for (auto& [name, p] : model.params().all())
        for (auto& v : p.value.values()) v += 0.05 * rng.normal();
    Tensor x({2, 2, 2, 2}), y({2, 2, 2, 2}), cond({2, 2, 2, 2});
    for (auto& v : x.values()) v = rng.normal();
    for (auto& v : y.values()) v = rng.normal();
    for (auto& v : cond.values()) v = rng.normal();
    double t = 0.42;
    Tensor f = model.forward(x, y, cond, t);
    Tensor u = model.score(x, y, cond, t, sched);
    double a = sched.a(t), var = sched.variance(t);
    double co = model.c_out(t, sched);
    CHECK(co == doctest::Approx(std::sqrt(a * a * 0.49 + var)).epsilon(1e-12));
    for (std::size_t i = 0; i < u.size(); ++i) {
        double want = (a * (y[i] - x[i]) + (1 - a) * co * f[i]) / var;
        CHECK(u[i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("score stays bounded at the terminal end") {
    // An O(1) network output must not blow up the drift near t = T; the
    // raw residual-over-sqrt(variance) head fails exactly this property.
    BridgeSchedule sched;
    DenoiserConfig dc;
    dc.state_channels = 2;
    dc.width = 4;
    dc.temb_dim = 8;
    DenoiserModel model(dc, 27);
    Rng rng(89);
    for (auto& [name, p] : model.params().all())
        for (auto& v : p.value.values()) v += 0.05 * rng.normal();
    Tensor y({2, 2, 2, 2}), cond({2, 2, 2, 2});
    for (auto& v : y.values()) v = rng.normal();
    for (auto& v : cond.values()) v = rng.normal();
    double t = sched.T - sched.t_min;
    Tensor f = model.forward(y, y, cond, t);
    Tensor u = model.score(y, y, cond, t, sched);
    double rf = 0, ru = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        rf += f[i] * f[i];
        ru += u[i] * u[i];
    }
    CHECK(std::sqrt(ru) <= std::sqrt(rf) + 1e-9);
}

TEST_CASE("rectified flow interpolant and perfect-velocity recovery") {
    Tensor x0 = scalar(0.0), y = scalar(2.0);
    // t=0.5 interpolant.
    CHECK(0.5 * x0[0] + 0.5 * y[0] == doctest::Approx(1.0));
    StraightVelocity v;
    v.x0 = x0;
    v.y = y;
    for (int steps : {1, 3, 17}) {
        Tensor x = rf_sample(v, y, steps);
        CHECK(x[0] == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("rectified flow training loss decreases") {
    DenoiserConfig dc;
    dc.state_channels = 1;
    dc.width = 4;
    dc.temb_dim = 8;
    DenoiserModel model(dc, 17);
    Rng data(67);
    std::vector<BridgeBatchItem> batch;
    Tensor x0({2, 2, 2, 1}), y({2, 2, 2, 1}), cond({2, 2, 2, 1});
    for (auto& v : x0.values()) v = data.normal();
    for (auto& v : y.values()) v = data.normal();
    for (auto& v : cond.values()) v = 0;
    batch.push_back({x0, y, cond});
    Adam opt(3e-3);
    Rng rng(71);
    double first = 0, last = 0;
    for (int i = 0; i < 400; ++i) {
        double l = rf_train_step(model, batch, rng);
        opt.step(model.params());
        if (i < 40) first += l;
        if (i >= 360) last += l;
    }
    CHECK(last < first);
}

TEST_CASE("occupancy binarize thresholds the trailing channel") {
    Tensor x({2, 2, 2, 3});
    for (std::size_t c = 0; c < 8; ++c) {
        x[c * 3 + 0] = 1.0 + c;
        x[c * 3 + 1] = -2.0;
        x[c * 3 + 2] = 0.9;
    }
    auto all_on = occupancy_binarize(x);
    CHECK(!all_on.empty);
    int active = 0;
    for (std::size_t c = 0; c < 8; ++c) active += all_on.grid.data()[c * 3 + 2] == 1.0;
    CHECK(active == 8);

    for (std::size_t c = 0; c < 8; ++c) x[c * 3 + 2] = 0.1;
    auto all_off = occupancy_binarize(x);
    CHECK(all_off.empty);

    Rng rng(73);
    for (auto& v : x.values()) v = rng.uniform();
    auto mixed = occupancy_binarize(x);
    for (std::size_t c = 0; c < 8; ++c) {
        bool on = x[c * 3 + 2] > 0.5;
        CHECK(mixed.grid.data()[c * 3 + 2] == (on ? 1.0 : 0.0));
        if (!on) CHECK(mixed.grid.data()[c * 3 + 0] == 0.0);
        if (on) CHECK(mixed.grid.data()[c * 3 + 0] == x[c * 3 + 0]);
    }
}

TEST_CASE("grid/tensor conversion round-trips") {
    Rng rng(79);
    LatentGrid g(3, 4);
    for (auto& v : g.data()) v = rng.normal();
    Tensor t = grid_tensor(g);
    REQUIRE(t.rank() == 4);
    CHECK(t.dim(0) == 3);
    CHECK(t.dim(3) == 4);
    LatentGrid back = tensor_grid(t);
    CHECK(back.data() == g.data());
}
