#include "jga/nn/layers.hpp"

#include <cmath>

namespace jga {

int auto_groups(int channels) {
    for (int g = std::min(channels, 8); g >= 1; --g)
        if (channels % g == 0) return g;
    return 1;
}

DenseConv3d::DenseConv3d(ParamStore& ps, const std::string& name, int in_ch, int out_ch,
                         int kernel, int stride, Rng& rng, bool zero_init)
    : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride),
      pad_(kernel == 2 ? 0 : kernel / 2) {
    check(kernel == 1 || kernel == 2 || kernel == 3, "conv kernel must be 1, 2 or 3");
    check(stride == 1 || stride == 2, "conv stride must be 1 or 2");
    w_ = &ps.create(name + ".w", {out_ch, kernel, kernel, kernel, in_ch});
    b_ = &ps.create(name + ".b", {out_ch});
    if (!zero_init) kaiming_init(w_->value, in_ch * kernel * kernel * kernel, rng);
}

Tensor DenseConv3d::forward(const Tensor& x) {
    check(x.rank() == 4 && x.dim(3) == in_ch_, "conv input shape mismatch");
    x_ = x;
    int X = x.dim(0), Y = x.dim(1), Z = x.dim(2);
    auto osz = [&](int n) { return (n + 2 * pad_ - k_) / stride_ + 1; };
    int OX = osz(X), OY = osz(Y), OZ = osz(Z);
    check(OX > 0 && OY > 0 && OZ > 0, "conv output would be empty");

    Tensor y({OX, OY, OZ, out_ch_});
    const double* w = w_->value.data();
    const double* b = b_->value.data();
    const std::size_t wtap = static_cast<std::size_t>(k_) * k_ * k_ * in_ch_;
    std::vector<double> acc(out_ch_);

    for (int ox = 0; ox < OX; ++ox)
        for (int oy = 0; oy < OY; ++oy)
            for (int oz = 0; oz < OZ; ++oz) {
                for (int c = 0; c < out_ch_; ++c) acc[c] = b[c];
                for (int dx = 0; dx < k_; ++dx) {
                    int ix = ox * stride_ + dx - pad_;
                    if (ix < 0 || ix >= X) continue;
                    for (int dy = 0; dy < k_; ++dy) {
                        int iy = oy * stride_ + dy - pad_;
                        if (iy < 0 || iy >= Y) continue;
                        for (int dz = 0; dz < k_; ++dz) {
                            int iz = oz * stride_ + dz - pad_;
                            if (iz < 0 || iz >= Z) continue;
                            const double* xin =
                                x.data() + ((static_cast<std::size_t>(ix) * Y + iy) * Z + iz) * in_ch_;
                            std::size_t tap = ((static_cast<std::size_t>(dx) * k_ + dy) * k_ + dz) * in_ch_;
                            for (int co = 0; co < out_ch_; ++co) {
                                const double* wrow = w + co * wtap + tap;
                                double s = 0;
                                for (int ci = 0; ci < in_ch_; ++ci) s += wrow[ci] * xin[ci];
                                acc[co] += s;
                            }
                        }
                    }
                }
                double* yout = y.data() + ((static_cast<std::size_t>(ox) * OY + oy) * OZ + oz) * out_ch_;
                for (int c = 0; c < out_ch_; ++c) yout[c] = acc[c];
            }
    return y;
}

Tensor DenseConv3d::backward(const Tensor& dy) {
    int X = x_.dim(0), Y = x_.dim(1), Z = x_.dim(2);
    int OX = dy.dim(0), OY = dy.dim(1), OZ = dy.dim(2);
    check(dy.rank() == 4 && dy.dim(3) == out_ch_, "conv backward shape mismatch");

    Tensor dx = Tensor::zeros_like(x_);
    const double* w = w_->value.data();
    double* dw = w_->grad.data();
    double* db = b_->grad.data();
    const std::size_t wtap = static_cast<std::size_t>(k_) * k_ * k_ * in_ch_;

    for (int ox = 0; ox < OX; ++ox)
        for (int oy = 0; oy < OY; ++oy)
            for (int oz = 0; oz < OZ; ++oz) {
                const double* g = dy.data() + ((static_cast<std::size_t>(ox) * OY + oy) * OZ + oz) * out_ch_;
                for (int c = 0; c < out_ch_; ++c) db[c] += g[c];
                for (int dxk = 0; dxk < k_; ++dxk) {
                    int ix = ox * stride_ + dxk - pad_;
                    if (ix < 0 || ix >= X) continue;
                    for (int dyk = 0; dyk < k_; ++dyk) {
                        int iy = oy * stride_ + dyk - pad_;
                        if (iy < 0 || iy >= Y) continue;
                        for (int dzk = 0; dzk < k_; ++dzk) {
                            int iz = oz * stride_ + dzk - pad_;
                            if (iz < 0 || iz >= Z) continue;
                            std::size_t xoff = ((static_cast<std::size_t>(ix) * Y + iy) * Z + iz) * in_ch_;
                            const double* xin = x_.data() + xoff;
                            double* dxin = dx.data() + xoff;
                            std::size_t tap = ((static_cast<std::size_t>(dxk) * k_ + dyk) * k_ + dzk) * in_ch_;
                            for (int co = 0; co < out_ch_; ++co) {
                                const double* wrow = w + co * wtap + tap;
                                double* dwrow = dw + co * wtap + tap;
                                double gc = g[co];
                                for (int ci = 0; ci < in_ch_; ++ci) {
                                    dxin[ci] += wrow[ci] * gc;
                                    dwrow[ci] += xin[ci] * gc;
                                }
                            }
                        }
                    }
                }
            }
    return dx;
}

GroupNorm::GroupNorm(ParamStore& ps, const std::string& name, int channels, int groups)
    : channels_(channels), groups_(groups) {
    check(channels % groups == 0, "groupnorm channels must divide into groups");
    gamma_ = &ps.create(name + ".gamma", {channels});
    beta_ = &ps.create(name + ".beta", {channels});
    gamma_->value.fill(1.0);
}

Tensor GroupNorm::forward(const Tensor& x) {
    check(x.rank() == 4 && x.dim(3) == channels_, "groupnorm input shape mismatch");
    const double eps = 1e-5;
    std::size_t nvox = x.size() / channels_;
    int gch = channels_ / groups_;

    xhat_ = Tensor::zeros_like(x);
    inv_std_.assign(groups_, 0.0);
    Tensor y = Tensor::zeros_like(x);
    const double* gm = gamma_->value.data();
    const double* bt = beta_->value.data();

    for (int g = 0; g < groups_; ++g) {
        int c0 = g * gch;
        double mean = 0;
        for (std::size_t v = 0; v < nvox; ++v)
            for (int c = 0; c < gch; ++c) mean += x[v * channels_ + c0 + c];
        double m = static_cast<double>(nvox) * gch;
        mean /= m;
        double var = 0;
        for (std::size_t v = 0; v < nvox; ++v)
            for (int c = 0; c < gch; ++c) {
                double d = x[v * channels_ + c0 + c] - mean;
                var += d * d;
            }
        var /= m;
        double is = 1.0 / std::sqrt(var + eps);
        inv_std_[g] = is;
        for (std::size_t v = 0; v < nvox; ++v)
            for (int c = 0; c < gch; ++c) {
                std::size_t i = v * channels_ + c0 + c;
                double xh = (x[i] - mean) * is;
                xhat_[i] = xh;
                y[i] = gm[c0 + c] * xh + bt[c0 + c];
            }
    }
    return y;
}

Tensor GroupNorm::backward(const Tensor& dy) {
    std::size_t nvox = dy.size() / channels_;
    int gch = channels_ / groups_;
    Tensor dx = Tensor::zeros_like(dy);
    const double* gm = gamma_->value.data();
    double* dgm = gamma_->grad.data();
    double* dbt = beta_->grad.data();

    for (int g = 0; g < groups_; ++g) {
        int c0 = g * gch;
        double m = static_cast<double>(nvox) * gch;
        double sum_dxh = 0, sum_dxh_xh = 0;
        for (std::size_t v = 0; v < nvox; ++v)
            for (int c = 0; c < gch; ++c) {
                std::size_t i = v * channels_ + c0 + c;
                double dyi = dy[i];
                dgm[c0 + c] += dyi * xhat_[i];
                dbt[c0 + c] += dyi;
                double dxh = dyi * gm[c0 + c];
                sum_dxh += dxh;
                sum_dxh_xh += dxh * xhat_[i];
            }
        double is = inv_std_[g];
        for (std::size_t v = 0; v < nvox; ++v)
            for (int c = 0; c < gch; ++c) {
                std::size_t i = v * channels_ + c0 + c;
                double dxh = dy[i] * gm[c0 + c];
                dx[i] = is * (dxh - sum_dxh / m - xhat_[i] * sum_dxh_xh / m);
            }
    }
    return dx;
}

Tensor SiLU::forward(const Tensor& x) {
    x_ = x;
    Tensor y = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = silu(x[i]);
    return y;
}

Tensor SiLU::backward(const Tensor& dy) {
    Tensor dx = Tensor::zeros_like(dy);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * silu_grad(x_[i]);
    return dx;
}

Linear::Linear(ParamStore& ps, const std::string& name, int in_dim, int out_dim, Rng& rng,
               bool zero_init)
    : in_dim_(in_dim), out_dim_(out_dim) {
    w_ = &ps.create(name + ".w", {out_dim, in_dim});
    b_ = &ps.create(name + ".b", {out_dim});
    if (!zero_init) kaiming_init(w_->value, in_dim, rng);
}

std::vector<double> Linear::forward(const std::vector<double>& x) {
    check(static_cast<int>(x.size()) == in_dim_, "linear input size mismatch");
    x_ = x;
    std::vector<double> y(out_dim_);
    const double* w = w_->value.data();
    for (int o = 0; o < out_dim_; ++o) {
        double s = b_->value[o];
        const double* wrow = w + static_cast<std::size_t>(o) * in_dim_;
        for (int i = 0; i < in_dim_; ++i) s += wrow[i] * x[i];
        y[o] = s;
    }
    return y;
}

std::vector<double> Linear::backward(const std::vector<double>& dy) {
    std::vector<double> dx(in_dim_, 0.0);
    const double* w = w_->value.data();
    double* dw = w_->grad.data();
    for (int o = 0; o < out_dim_; ++o) {
        b_->grad[o] += dy[o];
        const double* wrow = w + static_cast<std::size_t>(o) * in_dim_;
        double* dwrow = dw + static_cast<std::size_t>(o) * in_dim_;
        for (int i = 0; i < in_dim_; ++i) {
            dx[i] += wrow[i] * dy[o];
            dwrow[i] += x_[i] * dy[o];
        }
    }
    return dx;
}

Tensor UpsampleNearest2x::forward(const Tensor& x) {
    in_shape_ = x.shape();
    int X = x.dim(0), Y = x.dim(1), Z = x.dim(2), C = x.dim(3);
    Tensor y({2 * X, 2 * Y, 2 * Z, C});
    for (int ox = 0; ox < 2 * X; ++ox)
        for (int oy = 0; oy < 2 * Y; ++oy)
            for (int oz = 0; oz < 2 * Z; ++oz) {
                const double* src =
                    x.data() + ((static_cast<std::size_t>(ox / 2) * Y + oy / 2) * Z + oz / 2) * C;
                double* dst =
                    y.data() + ((static_cast<std::size_t>(ox) * 2 * Y + oy) * 2 * Z + oz) * C;
                for (int c = 0; c < C; ++c) dst[c] = src[c];
            }
    return y;
}

Tensor UpsampleNearest2x::backward(const Tensor& dy) {
    int X = in_shape_[0], Y = in_shape_[1], Z = in_shape_[2], C = in_shape_[3];
    Tensor dx(in_shape_);
    for (int ox = 0; ox < 2 * X; ++ox)
        for (int oy = 0; oy < 2 * Y; ++oy)
            for (int oz = 0; oz < 2 * Z; ++oz) {
                double* dst =
                    dx.data() + ((static_cast<std::size_t>(ox / 2) * Y + oy / 2) * Z + oz / 2) * C;
                const double* src =
                    dy.data() + ((static_cast<std::size_t>(ox) * 2 * Y + oy) * 2 * Z + oz) * C;
                for (int c = 0; c < C; ++c) dst[c] += src[c];
            }
    return dx;
}

} // namespace jga
