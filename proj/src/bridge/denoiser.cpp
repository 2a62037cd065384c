#include "jga/bridge/denoiser.hpp"

#include <cmath>

namespace jga {

Tensor grid_tensor(const LatentGrid& grid) {
    int r = grid.resolution();
    Tensor t({size_t(r), size_t(r), size_t(r), size_t(grid.channels())});
    std::copy(grid.data().begin(), grid.data().end(), t.data());
    return t;
}

LatentGrid tensor_grid(const Tensor& t) {
    check(t.rank() == 4, "latent state must be [r,r,r,C]");
    int r = int(t.dim(0));
    check(t.dim(1) == size_t(r) && t.dim(2) == size_t(r), "latent state must be cubic");
    LatentGrid grid(r, int(t.dim(3)));
    std::copy(t.data(), t.data() + t.size(), grid.data().begin());
    return grid;
}

namespace {

Tensor concat_channels(const Tensor& a, const Tensor& b, const Tensor& c) {
    check(a.same_shape(b) && a.same_shape(c), "conditioning shapes differ from the state");
    size_t ca = a.dim(3);
    Tensor out({a.dim(0), a.dim(1), a.dim(2), 3 * ca});
    size_t cells = a.size() / ca;
    for (size_t i = 0; i < cells; ++i) {
        double* dst = out.data() + i * 3 * ca;
        std::copy(a.data() + i * ca, a.data() + (i + 1) * ca, dst);
        std::copy(b.data() + i * ca, b.data() + (i + 1) * ca, dst + ca);
        std::copy(c.data() + i * ca, c.data() + (i + 1) * ca, dst + 2 * ca);
    }
    return out;
}

} // namespace

DenoiserModel::DenoiserModel(const DenoiserConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "denoiser-init"));
    DenseUNetConfig net_cfg;
    net_cfg.in_ch = 3 * cfg_.state_channels;
    net_cfg.out_ch = cfg_.state_channels;
    net_cfg.width = cfg_.width;
    net_cfg.temb_dim = cfg_.temb_dim;
    net_ = std::make_unique<DenseUNet>(ps_, "denoiser", net_cfg, rng);
}

Tensor DenoiserModel::forward(const Tensor& x_t, const Tensor& y, const Tensor& cond, double t) {
    check(x_t.rank() == 4 && x_t.dim(3) == size_t(cfg_.state_channels),
          "state channel count does not match the denoiser");
    return net_->forward(concat_channels(x_t, y, cond), t);
}

void DenoiserModel::backward(const Tensor& d_out) { net_->backward(d_out); }

double DenoiserModel::c_out(double t, const BridgeSchedule& sched) const {
    double a = sched.a(t);
    return std::sqrt(a * a * cfg_.sigma_disp * cfg_.sigma_disp + sched.variance(t));
}

Tensor DenoiserModel::score(const Tensor& x_t, const Tensor& y, const Tensor& cond, double t,
                            const BridgeSchedule& sched) {
    check(t > 0 && t < sched.T, "score undefined at the endpoints");
    Tensor f = forward(x_t, y, cond, t);
    double a = sched.a(t);
    double var = sched.variance(t);
    double co = c_out(t, sched);
    Tensor u = Tensor::zeros_like(f);
    for (size_t i = 0; i < f.size(); ++i)
        u.data()[i] = (a * (y.data()[i] - x_t.data()[i]) + (1 - a) * co * f.data()[i]) / var;
    return u;
}

} // namespace jga
