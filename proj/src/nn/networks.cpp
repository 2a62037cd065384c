#include "jga/nn/networks.hpp"

#include <cmath>

namespace jga {

std::vector<double> sinusoidal_embedding(double t, int dim) {
    check(dim >= 2 && dim % 2 == 0, "sinusoidal embedding dim must be even and >= 2");
    int half = dim / 2;
    std::vector<double> e(dim);
    for (int i = 0; i < half; ++i) {
        double w = half == 1 ? 1.0 : std::exp(std::log(1000.0) * i / (half - 1));
        e[i] = std::sin(w * t);
        e[half + i] = std::cos(w * t);
    }
    return e;
}

TimeEmbedding::TimeEmbedding(ParamStore& ps, const std::string& name, int sin_dim,
                             int hidden, Rng& rng)
    : sin_dim_(sin_dim), hidden_(hidden),
      l1_(ps, name + ".l1", sin_dim, hidden, rng),
      l2_(ps, name + ".l2", hidden, hidden, rng) {}

std::vector<double> TimeEmbedding::forward(double t) {
    pre_act_ = l1_.forward(sinusoidal_embedding(t, sin_dim_));
    std::vector<double> h(pre_act_.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = silu(pre_act_[i]);
    return l2_.forward(h);
}

void TimeEmbedding::backward(const std::vector<double>& dh) {
    std::vector<double> d = l2_.backward(dh);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= silu_grad(pre_act_[i]);
    l1_.backward(d);
}

DenseResBlock::DenseResBlock(ParamStore& ps, const std::string& name, int channels,
                             int temb_dim, Rng& rng)
    : gn1_(ps, name + ".gn1", channels, auto_groups(channels)),
      gn2_(ps, name + ".gn2", channels, auto_groups(channels)),
      conv1_(ps, name + ".conv1", channels, channels, 3, 1, rng),
      conv2_(ps, name + ".conv2", channels, channels, 3, 1, rng, /*zero_init=*/true) {
    if (temb_dim > 0)
        time_proj_ = std::make_unique<Linear>(ps, name + ".tproj", temb_dim, channels, rng);
}

Tensor DenseResBlock::forward(const Tensor& x, const std::vector<double>& temb) {
    Tensor h = conv1_.forward(act1_.forward(gn1_.forward(x)));
    if (time_proj_) {
        std::vector<double> shift = time_proj_->forward(temb);
        int C = h.dim(3);
        std::size_t nvox = h.size() / C;
        for (std::size_t v = 0; v < nvox; ++v)
            for (int c = 0; c < C; ++c) h[v * C + c] += shift[c];
    }
    h = conv2_.forward(act2_.forward(gn2_.forward(h)));
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += x[i];
    return h;
}

Tensor DenseResBlock::backward(const Tensor& dy, std::vector<double>* dtemb) {
    Tensor dh = gn2_.backward(act2_.backward(conv2_.backward(dy)));
    if (time_proj_) {
        int C = dh.dim(3);
        std::size_t nvox = dh.size() / C;
        std::vector<double> dshift(C, 0.0);
        for (std::size_t v = 0; v < nvox; ++v)
            for (int c = 0; c < C; ++c) dshift[c] += dh[v * C + c];
        std::vector<double> dt = time_proj_->backward(dshift);
        if (dtemb)
            for (std::size_t i = 0; i < dt.size(); ++i) (*dtemb)[i] += dt[i];
    }
    Tensor dx = gn1_.backward(act1_.backward(conv1_.backward(dh)));
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    return dx;
}

DenseUNet::DenseUNet(ParamStore& ps, const std::string& name, const DenseUNetConfig& cfg,
                     Rng& rng)
    : cfg_(cfg),
      temb_(ps, name + ".temb", 32, cfg.temb_dim, rng),
      conv_in_(ps, name + ".conv_in", cfg.in_ch, cfg.width, 3, 1, rng),
      block1_(ps, name + ".block1", cfg.width, cfg.temb_dim, rng),
      down_(ps, name + ".down", cfg.width, 2 * cfg.width, 2, 2, rng),
      block2_(ps, name + ".block2", 2 * cfg.width, cfg.temb_dim, rng),
      block3_(ps, name + ".block3", 2 * cfg.width, cfg.temb_dim, rng),
      up_conv_(ps, name + ".up_conv", 2 * cfg.width, cfg.width, 3, 1, rng),
      block4_(ps, name + ".block4", cfg.width, cfg.temb_dim, rng),
      out_norm_(ps, name + ".out_norm", cfg.width, auto_groups(cfg.width)),
      conv_out_(ps, name + ".conv_out", cfg.width, cfg.out_ch, 3, 1, rng,
                /*zero_init=*/true) {}

Tensor DenseUNet::forward(const Tensor& x, double t) {
    check(x.dim(0) % 2 == 0 && x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0,
          "denoiser grid dims must be even");
    std::vector<double> te = temb_.forward(t);
    Tensor h1 = block1_.forward(conv_in_.forward(x), te);
    Tensor h = block3_.forward(block2_.forward(down_.forward(h1), te), te);
    h = up_conv_.forward(up_.forward(h));
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += h1[i];
    h = block4_.forward(h, te);
    return conv_out_.forward(out_act_.forward(out_norm_.forward(h)));
}

Tensor DenseUNet::backward(const Tensor& dy) {
    std::vector<double> dte(cfg_.temb_dim, 0.0);
    Tensor dh = out_norm_.backward(out_act_.backward(conv_out_.backward(dy)));
    dh = block4_.backward(dh, &dte);
    Tensor dskip = dh;
    dh = up_.backward(up_conv_.backward(dh));
    dh = block2_.backward(block3_.backward(dh, &dte), &dte);
    dh = down_.backward(dh);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dskip[i];
    Tensor dx = conv_in_.backward(block1_.backward(dh, &dte));
    temb_.backward(dte);
    return dx;
}

SparseResBlock::SparseResBlock(ParamStore& ps, const std::string& name, int channels,
                               int dilation, Rng& rng, bool light)
    : light_(light),
      gn1_(ps, name + ".gn1", channels, auto_groups(channels)),
      conv1_(ps, name + ".conv1", channels, channels, 3, 1, dilation, rng,
             /*zero_init=*/light) {
    if (!light) {
        gn2_ = std::make_unique<SparseGroupNorm>(ps, name + ".gn2", channels,
                                                 auto_groups(channels));
        conv2_ = std::make_unique<SparseConv3d>(ps, name + ".conv2", channels, channels, 3,
                                                1, dilation, rng, /*zero_init=*/true);
    }
}

SparseVoxelTensor SparseResBlock::forward(const SparseVoxelTensor& x) {
    SparseVoxelTensor h = conv1_.forward(act1_.forward(gn1_.forward(x)));
    if (!light_) h = conv2_->forward(act2_.forward(gn2_->forward(h)));
    for (std::size_t i = 0; i < h.features().size(); ++i) h.features()[i] += x.features()[i];
    return h;
}

SparseVoxelTensor SparseResBlock::backward(const SparseVoxelTensor& dy) {
    SparseVoxelTensor dh = dy;
    if (!light_) dh = gn2_->backward(act2_.backward(conv2_->backward(dy)));
    SparseVoxelTensor dx = gn1_.backward(act1_.backward(conv1_.backward(dh)));
    for (std::size_t i = 0; i < dx.features().size(); ++i)
        dx.features()[i] += dy.features()[i];
    return dx;
}

SparseResNet::SparseResNet(ParamStore& ps, const std::string& name,
                           const SparseResNetConfig& cfg, Rng& rng)
    : cfg_(cfg),
      stem_(ps, name + ".stem", cfg.in_ch, cfg.width, 3, 1, 1, rng),
      head_norm_(ps, name + ".head_norm", cfg.width, auto_groups(cfg.width)),
      head_(ps, name + ".head", cfg.width, cfg.out_ch, 3, 1, 1, rng, cfg.zero_init_head) {
    for (int i = 0; i < cfg.blocks; ++i)
        blocks_.push_back(std::make_unique<SparseResBlock>(
            ps, name + ".block" + std::to_string(i), cfg.width, i % 2 == 0 ? 1 : 2, rng));
}

SparseVoxelTensor SparseResNet::forward(const SparseVoxelTensor& x) {
    SparseVoxelTensor h = stem_.forward(x);
    for (auto& b : blocks_) h = b->forward(h);
    return head_.forward(head_act_.forward(head_norm_.forward(h)));
}

SparseVoxelTensor SparseResNet::backward(const SparseVoxelTensor& dy) {
    SparseVoxelTensor dh = head_norm_.backward(head_act_.backward(head_.backward(dy)));
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dh = (*it)->backward(dh);
    return stem_.backward(dh);
}

} // namespace jga
