#include "jga/bridge/schedule.hpp"

#include <cmath>

namespace jga {
namespace {

double log_snr(const BridgeSchedule& s, double t) {
    double s2 = s.sigma2(t);
    return std::log(s2 / (s.sigma2(s.T) - s2));
}

double time_from_log_snr(const BridgeSchedule& s, double lam) {
    // sigma^2(t) = sigmoid(lam) * sigma^2(T), and sigma(t) = t here.
    return std::sqrt(sigmoid(lam) * s.sigma2(s.T));
}

} // namespace

std::vector<double> BridgeSchedule::time_grid(int n) const {
    validate();
    check(n >= 1, "time grid needs at least one step");
    double lam_hi = log_snr(*this, T - t_min);
    double lam_lo = log_snr(*this, t_min);
    std::vector<double> ts(n + 1);
    for (int i = 0; i <= n; ++i) {
        double lam = lam_hi + (lam_lo - lam_hi) * (double(i) / n);
        ts[i] = time_from_log_snr(*this, lam);
    }
    ts.front() = T - t_min;
    ts.back() = t_min;
    return ts;
}

BridgeMoments bridge_marginal(const Tensor& x0, const Tensor& y, double t,
                              const BridgeSchedule& sched) {
    sched.validate();
    check(x0.same_shape(y), "bridge endpoints must share a shape");
    check(t >= 0 && t <= sched.T, "bridge time outside [0, T]");
    double at = sched.a(t);
    BridgeMoments m;
    m.mean = Tensor::zeros_like(x0);
    for (size_t i = 0; i < x0.size(); ++i)
        m.mean.data()[i] = at * y.data()[i] + (1.0 - at) * x0.data()[i];
    m.variance = sched.variance(t);
    return m;
}

Tensor sample_bridge(const Tensor& x0, const Tensor& y, double t,
                     const BridgeSchedule& sched, Rng& rng) {
    BridgeMoments m = bridge_marginal(x0, y, t, sched);
    double sd = std::sqrt(m.variance);
    Tensor out = m.mean;
    for (size_t i = 0; i < out.size(); ++i)
        out.data()[i] += sd * rng.normal();
    return out;
}

Tensor bridge_score(const Tensor& x_t, const Tensor& x0, const Tensor& y, double t,
                    const BridgeSchedule& sched) {
    check(t > 0 && t < sched.T, "bridge score undefined at the endpoints");
    check(x_t.same_shape(x0), "state and endpoint shapes differ");
    BridgeMoments m = bridge_marginal(x0, y, t, sched);
    Tensor out = Tensor::zeros_like(x_t);
    double inv = 1.0 / m.variance;
    for (size_t i = 0; i < out.size(); ++i)
        out.data()[i] = (m.mean.data()[i] - x_t.data()[i]) * inv;
    return out;
}

Tensor h_transform(const Tensor& x, double t, const Tensor& y, const BridgeSchedule& sched) {
    sched.validate();
    check(t < sched.T, "drift adjustment undefined at t = T");
    check(x.same_shape(y), "state and endpoint shapes differ");
    double inv = 1.0 / (sched.sigma2(sched.T) - sched.sigma2(t));
    Tensor out = Tensor::zeros_like(x);
    for (size_t i = 0; i < out.size(); ++i)
        out.data()[i] = (y.data()[i] - x.data()[i]) * inv;
    return out;
}

BinarizeResult occupancy_binarize(const Tensor& x0) {
    check(x0.rank() == 4, "state must be [r,r,r,C]");
    int r = x0.dim(0);
    check(x0.dim(1) == r && x0.dim(2) == r, "state grid must be cubic");
    int c = x0.dim(3);
    check(c >= 2, "state needs features plus an occupancy channel");
    BinarizeResult res;
    res.grid = LatentGrid(r, c);
    size_t n_active = 0;
    for (size_t cell = 0; cell < x0.size() / c; ++cell) {
        const double* src = x0.data() + cell * c;
        double* dst = res.grid.data().data() + cell * c;
        bool on = src[c - 1] > 0.5;
        for (int ch = 0; ch < c - 1; ++ch) dst[ch] = on ? src[ch] : 0.0;
        dst[c - 1] = on ? 1.0 : 0.0;
        n_active += on;
    }
    res.empty = n_active == 0;
    return res;
}

} // namespace jga
