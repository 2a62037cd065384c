#include "jga/nn/sparse_ops.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace jga {

namespace {
std::int32_t floor_div2(std::int32_t v) { return v >= 0 ? v / 2 : (v - 1) / 2; }
} // namespace

SparseConv3d::SparseConv3d(ParamStore& ps, const std::string& name, int in_ch, int out_ch,
                           int kernel, int stride, int dilation, Rng& rng, bool zero_init)
    : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), dil_(dilation) {
    if (stride == 1)
        check(kernel % 2 == 1, "stride-1 sparse conv needs an odd kernel");
    else
        check(stride == 2 && kernel == 2 && dilation == 1,
              "stride-2 sparse conv supports kernel 2 only");
    w_ = &ps.create(name + ".w", {out_ch, kernel, kernel, kernel, in_ch});
    b_ = &ps.create(name + ".b", {out_ch});
    if (!zero_init) kaiming_init(w_->value, in_ch * kernel * kernel * kernel, rng);
}

SparseVoxelTensor SparseConv3d::forward(const SparseVoxelTensor& x) {
    check(x.finalized() && x.channels() == in_ch_, "sparse conv input mismatch");
    x_ = x;
    const int kc = k_ * k_ * k_;

    SparseVoxelTensor y;
    if (stride_ == 1) {
        y = SparseVoxelTensor::aligned(x, out_ch_);
    } else {
        SparseVoxelTensor tmp(x.resolution() / 2, out_ch_);
        std::unordered_set<std::uint64_t> seen;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const Coord& c = x.coord(i);
            Coord o{floor_div2(c[0]), floor_div2(c[1]), floor_div2(c[2])};
            if (seen.insert(coord_key(o)).second) tmp.push_zero(o);
        }
        tmp.finalize();
        y = std::move(tmp);
    }

    taps_.assign(y.size() * kc, -1);
    const int center = stride_ == 1 ? k_ / 2 : 0;
    for (std::size_t o = 0; o < y.size(); ++o) {
        const Coord& oc = y.coord(o);
        for (int dx = 0; dx < k_; ++dx)
            for (int dy = 0; dy < k_; ++dy)
                for (int dz = 0; dz < k_; ++dz) {
                    Coord ic{oc[0] * stride_ + dil_ * (dx - center),
                             oc[1] * stride_ + dil_ * (dy - center),
                             oc[2] * stride_ + dil_ * (dz - center)};
                    taps_[o * kc + (dx * k_ + dy) * k_ + dz] = x.find(ic);
                }
    }

    const double* w = w_->value.data();
    const double* b = b_->value.data();
    const std::size_t wtap = static_cast<std::size_t>(kc) * in_ch_;
    for (std::size_t o = 0; o < y.size(); ++o) {
        double* out = y.feature(o);
        for (int co = 0; co < out_ch_; ++co) out[co] = b[co];
        for (int t = 0; t < kc; ++t) {
            std::int64_t i = taps_[o * kc + t];
            if (i < 0) continue;
            const double* xin = x.feature(static_cast<std::size_t>(i));
            for (int co = 0; co < out_ch_; ++co) {
                const double* wrow = w + co * wtap + static_cast<std::size_t>(t) * in_ch_;
                double s = 0;
                for (int ci = 0; ci < in_ch_; ++ci) s += wrow[ci] * xin[ci];
                out[co] += s;
            }
        }
    }
    return y;
}

SparseVoxelTensor SparseConv3d::backward(const SparseVoxelTensor& dy) {
    check(dy.channels() == out_ch_, "sparse conv backward channel mismatch");
    const int kc = k_ * k_ * k_;
    check(dy.size() * kc == taps_.size(), "sparse conv backward row mismatch");

    SparseVoxelTensor dx = SparseVoxelTensor::aligned(x_, in_ch_);
    const double* w = w_->value.data();
    double* dw = w_->grad.data();
    double* db = b_->grad.data();
    const std::size_t wtap = static_cast<std::size_t>(kc) * in_ch_;

    for (std::size_t o = 0; o < dy.size(); ++o) {
        const double* g = dy.feature(o);
        for (int co = 0; co < out_ch_; ++co) db[co] += g[co];
        for (int t = 0; t < kc; ++t) {
            std::int64_t i = taps_[o * kc + t];
            if (i < 0) continue;
            const double* xin = x_.feature(static_cast<std::size_t>(i));
            double* dxin = dx.feature(static_cast<std::size_t>(i));
            for (int co = 0; co < out_ch_; ++co) {
                const double* wrow = w + co * wtap + static_cast<std::size_t>(t) * in_ch_;
                double* dwrow = dw + co * wtap + static_cast<std::size_t>(t) * in_ch_;
                double gc = g[co];
                for (int ci = 0; ci < in_ch_; ++ci) {
                    dxin[ci] += wrow[ci] * gc;
                    dwrow[ci] += xin[ci] * gc;
                }
            }
        }
    }
    return dx;
}

GenSparseTransposeConv3d::GenSparseTransposeConv3d(ParamStore& ps, const std::string& name,
                                                   int in_ch, int out_ch, int kernel,
                                                   int stride, Rng& rng, bool zero_init,
                                                   std::size_t max_voxels)
    : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), max_voxels_(max_voxels) {
    if (stride == 2)
        check(kernel == 2, "stride-2 generative transpose conv supports kernel 2 only");
    else
        check(stride == 1 && kernel % 2 == 1,
              "stride-1 generative transpose conv needs an odd kernel");
    w_ = &ps.create(name + ".w", {out_ch, kernel, kernel, kernel, in_ch});
    b_ = &ps.create(name + ".b", {out_ch});
    if (!zero_init) kaiming_init(w_->value, in_ch * kernel * kernel * kernel, rng);
}

std::vector<Coord> GenSparseTransposeConv3d::generate_coords(const std::vector<Coord>& in,
                                                             int kernel, int stride) {
    const int center = stride == 1 ? kernel / 2 : 0;
    std::unordered_set<std::uint64_t> seen;
    std::vector<Coord> out;
    for (const Coord& c : in)
        for (int dx = 0; dx < kernel; ++dx)
            for (int dy = 0; dy < kernel; ++dy)
                for (int dz = 0; dz < kernel; ++dz) {
                    Coord o{c[0] * stride + dx - center, c[1] * stride + dy - center,
                            c[2] * stride + dz - center};
                    if (seen.insert(coord_key(o)).second) out.push_back(o);
                }
    std::sort(out.begin(), out.end(), coord_less);
    return out;
}

SparseVoxelTensor GenSparseTransposeConv3d::forward(const SparseVoxelTensor& x) {
    check(x.finalized() && x.channels() == in_ch_, "transpose conv input mismatch");
    x_ = x;
    const int kc = k_ * k_ * k_;

    std::vector<Coord> ocs = generate_coords(x.coords(), k_, stride_);
    check(ocs.size() <= max_voxels_, "transpose conv output exceeds voxel capacity");
    SparseVoxelTensor y(stride_ == 2 ? x.resolution() * 2 : x.resolution(), out_ch_);
    for (const Coord& c : ocs) y.push_zero(c);
    y.finalize();
    n_out_ = y.size();

    const int center = stride_ == 1 ? k_ / 2 : 0;
    taps_.assign(x.size() * kc, -1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Coord& c = x.coord(i);
        for (int dx = 0; dx < k_; ++dx)
            for (int dy = 0; dy < k_; ++dy)
                for (int dz = 0; dz < k_; ++dz) {
                    Coord o{c[0] * stride_ + dx - center, c[1] * stride_ + dy - center,
                            c[2] * stride_ + dz - center};
                    std::int64_t j = y.find(o);
                    check(j >= 0, "generated coordinate missing from output");
                    taps_[i * kc + (dx * k_ + dy) * k_ + dz] = j;
                }
    }

    const double* w = w_->value.data();
    const std::size_t wtap = static_cast<std::size_t>(kc) * in_ch_;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double* xin = x.feature(i);
        for (int t = 0; t < kc; ++t) {
            double* out = y.feature(static_cast<std::size_t>(taps_[i * kc + t]));
            for (int co = 0; co < out_ch_; ++co) {
                const double* wrow = w + co * wtap + static_cast<std::size_t>(t) * in_ch_;
                double s = 0;
                for (int ci = 0; ci < in_ch_; ++ci) s += wrow[ci] * xin[ci];
                out[co] += s;
            }
        }
    }
    const double* b = b_->value.data();
    for (std::size_t o = 0; o < y.size(); ++o) {
        double* out = y.feature(o);
        for (int co = 0; co < out_ch_; ++co) out[co] += b[co];
    }
    return y;
}

SparseVoxelTensor GenSparseTransposeConv3d::backward(const SparseVoxelTensor& dy) {
    check(dy.channels() == out_ch_ && dy.size() == n_out_,
          "transpose conv backward shape mismatch");
    const int kc = k_ * k_ * k_;

    SparseVoxelTensor dx = SparseVoxelTensor::aligned(x_, in_ch_);
    const double* w = w_->value.data();
    double* dw = w_->grad.data();
    double* db = b_->grad.data();
    const std::size_t wtap = static_cast<std::size_t>(kc) * in_ch_;

    for (std::size_t o = 0; o < dy.size(); ++o) {
        const double* g = dy.feature(o);
        for (int co = 0; co < out_ch_; ++co) db[co] += g[co];
    }
    for (std::size_t i = 0; i < x_.size(); ++i) {
        const double* xin = x_.feature(i);
        double* dxin = dx.feature(i);
        for (int t = 0; t < kc; ++t) {
            const double* g = dy.feature(static_cast<std::size_t>(taps_[i * kc + t]));
            for (int co = 0; co < out_ch_; ++co) {
                const double* wrow = w + co * wtap + static_cast<std::size_t>(t) * in_ch_;
                double* dwrow = dw + co * wtap + static_cast<std::size_t>(t) * in_ch_;
                double gc = g[co];
                for (int ci = 0; ci < in_ch_; ++ci) {
                    dxin[ci] += wrow[ci] * gc;
                    dwrow[ci] += xin[ci] * gc;
                }
            }
        }
    }
    return dx;
}

SparseGroupNorm::SparseGroupNorm(ParamStore& ps, const std::string& name, int channels,
                                 int groups)
    : channels_(channels), groups_(groups) {
    check(channels % groups == 0, "groupnorm channels must divide into groups");
    gamma_ = &ps.create(name + ".gamma", {channels});
    beta_ = &ps.create(name + ".beta", {channels});
    gamma_->value.fill(1.0);
}

SparseVoxelTensor SparseGroupNorm::forward(const SparseVoxelTensor& x) {
    check(x.channels() == channels_, "groupnorm channel mismatch");
    const double eps = 1e-5;
    std::size_t n = x.size();
    int gch = channels_ / groups_;

    xhat_ = SparseVoxelTensor::aligned(x, channels_);
    inv_std_.assign(groups_, 0.0);
    SparseVoxelTensor y = SparseVoxelTensor::aligned(x, channels_);
    if (n == 0) return y;

    const double* gm = gamma_->value.data();
    const double* bt = beta_->value.data();
    const std::vector<double>& xv = x.features();

    for (int g = 0; g < groups_; ++g) {
        int c0 = g * gch;
        double m = static_cast<double>(n) * gch;
        double mean = 0;
        for (std::size_t v = 0; v < n; ++v)
            for (int c = 0; c < gch; ++c) mean += xv[v * channels_ + c0 + c];
        mean /= m;
        double var = 0;
        for (std::size_t v = 0; v < n; ++v)
            for (int c = 0; c < gch; ++c) {
                double d = xv[v * channels_ + c0 + c] - mean;
                var += d * d;
            }
        var /= m;
        double is = 1.0 / std::sqrt(var + eps);
        inv_std_[g] = is;
        for (std::size_t v = 0; v < n; ++v)
            for (int c = 0; c < gch; ++c) {
                std::size_t i = v * channels_ + c0 + c;
                double xh = (xv[i] - mean) * is;
                xhat_.features()[i] = xh;
                y.features()[i] = gm[c0 + c] * xh + bt[c0 + c];
            }
    }
    return y;
}

SparseVoxelTensor SparseGroupNorm::backward(const SparseVoxelTensor& dy) {
    std::size_t n = dy.size();
    int gch = channels_ / groups_;
    SparseVoxelTensor dx = SparseVoxelTensor::aligned(dy, channels_);
    if (n == 0) return dx;

    const double* gm = gamma_->value.data();
    double* dgm = gamma_->grad.data();
    double* dbt = beta_->grad.data();
    const std::vector<double>& dyv = dy.features();
    const std::vector<double>& xh = xhat_.features();

    for (int g = 0; g < groups_; ++g) {
        int c0 = g * gch;
        double m = static_cast<double>(n) * gch;
        double sum_dxh = 0, sum_dxh_xh = 0;
        for (std::size_t v = 0; v < n; ++v)
            for (int c = 0; c < gch; ++c) {
                std::size_t i = v * channels_ + c0 + c;
                dgm[c0 + c] += dyv[i] * xh[i];
                dbt[c0 + c] += dyv[i];
                double dxh = dyv[i] * gm[c0 + c];
                sum_dxh += dxh;
                sum_dxh_xh += dxh * xh[i];
            }
        double is = inv_std_[g];
        for (std::size_t v = 0; v < n; ++v)
            for (int c = 0; c < gch; ++c) {
                std::size_t i = v * channels_ + c0 + c;
                double dxh = dyv[i] * gm[c0 + c];
                dx.features()[i] = is * (dxh - sum_dxh / m - xh[i] * sum_dxh_xh / m);
            }
    }
    return dx;
}

SparseVoxelTensor SparseSiLU::forward(const SparseVoxelTensor& x) {
    x_ = x;
    SparseVoxelTensor y = SparseVoxelTensor::aligned(x, x.channels());
    for (std::size_t i = 0; i < x.features().size(); ++i)
        y.features()[i] = silu(x.features()[i]);
    return y;
}

SparseVoxelTensor SparseSiLU::backward(const SparseVoxelTensor& dy) {
    SparseVoxelTensor dx = SparseVoxelTensor::aligned(dy, dy.channels());
    for (std::size_t i = 0; i < dy.features().size(); ++i)
        dx.features()[i] = dy.features()[i] * silu_grad(x_.features()[i]);
    return dx;
}

namespace {
PruneResult prune_rows(const SparseVoxelTensor& x, const std::vector<char>& keep) {
    PruneResult r;
    SparseVoxelTensor kept(x.resolution(), x.channels());
    for (std::size_t i = 0; i < x.size(); ++i)
        if (keep[i]) {
            kept.push(x.coord(i), x.feature(i));
            r.src_rows.push_back(static_cast<std::int64_t>(i));
        }
    kept.finalize();
    r.kept = std::move(kept);
    r.all_pruned = r.kept.empty() && !x.empty();
    return r;
}
} // namespace

PruneResult prune(const SparseVoxelTensor& x, const std::vector<double>& logits,
                  double threshold) {
    check(logits.size() == x.size(), "prune logits must align with voxels");
    std::vector<char> keep(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) keep[i] = sigmoid(logits[i]) > threshold;
    return prune_rows(x, keep);
}

PruneResult prune_mask(const SparseVoxelTensor& x, const std::vector<char>& keep) {
    check(keep.size() == x.size(), "prune mask must align with voxels");
    return prune_rows(x, keep);
}

SparseVoxelTensor prune_backward(const SparseVoxelTensor& x, const PruneResult& result,
                                 const SparseVoxelTensor& dy) {
    check(dy.size() == result.kept.size(), "prune backward row mismatch");
    SparseVoxelTensor dx = SparseVoxelTensor::aligned(x, x.channels());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        double* dst = dx.feature(static_cast<std::size_t>(result.src_rows[i]));
        const double* src = dy.feature(i);
        for (int c = 0; c < x.channels(); ++c) dst[c] += src[c];
    }
    return dx;
}

} // namespace jga
