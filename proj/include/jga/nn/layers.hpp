#pragma once

#include "jga/nn/params.hpp"

namespace jga {

// Dense activations are rank-4 tensors [X, Y, Z, C].

// Largest divisor of the channel count that is at most 8.
int auto_groups(int channels);

// Cross-correlation with zero padding. Odd kernels pad k/2 (stride 1
// preserves size); kernel 2 pads 0 and is used with stride 2.
class DenseConv3d {
public:
    DenseConv3d(ParamStore& ps, const std::string& name, int in_ch, int out_ch,
                int kernel, int stride, Rng& rng, bool zero_init = false);

    Tensor forward(const Tensor& x);
    // Accumulates weight/bias gradients, returns gradient w.r.t. input.
    Tensor backward(const Tensor& dy);

    int out_ch() const { return out_ch_; }

private:
    Param* w_;
    Param* b_;
    int in_ch_, out_ch_, k_, stride_, pad_;
    Tensor x_;
};

class GroupNorm {
public:
    GroupNorm(ParamStore& ps, const std::string& name, int channels, int groups);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    Param* gamma_;
    Param* beta_;
    int channels_, groups_;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

class SiLU {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    Tensor x_;
};

// Vector-in, vector-out.
class Linear {
public:
    Linear(ParamStore& ps, const std::string& name, int in_dim, int out_dim, Rng& rng,
           bool zero_init = false);

    std::vector<double> forward(const std::vector<double>& x);
    std::vector<double> backward(const std::vector<double>& dy);

private:
    Param* w_;
    Param* b_;
    int in_dim_, out_dim_;
    std::vector<double> x_;
};

// Nearest-neighbor 2x upsampling in all three spatial dims.
class UpsampleNearest2x {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    std::vector<int> in_shape_;
};

} // namespace jga
