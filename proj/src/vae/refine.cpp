#include "jga/vae/refine.hpp"

namespace jga {

RefineModel::RefineModel(int attr_channels, std::uint64_t seed, int width, int blocks) {
    Rng rng(derive_seed(seed, "refine-init"));
    SparseResNetConfig cfg;
    cfg.in_ch = attr_channels;
    cfg.out_ch = attr_channels;
    cfg.width = width;
    cfg.blocks = blocks;
    cfg.zero_init_head = true;
    net_ = std::make_unique<SparseResNet>(params_, "refine", cfg, rng);
}

SparseVoxelTensor RefineModel::forward(const SparseVoxelTensor& decoded) {
    SparseVoxelTensor delta = net_->forward(decoded);
    SparseVoxelTensor out = decoded;
    for (std::size_t i = 0; i < out.features().size(); ++i)
        out.features()[i] += delta.features()[i];
    return out;
}

SparseVoxelTensor RefineModel::backward(const SparseVoxelTensor& dout) {
    SparseVoxelTensor dx = net_->backward(dout);
    for (std::size_t i = 0; i < dx.features().size(); ++i)
        dx.features()[i] += dout.features()[i];
    return dx;
}

} // namespace jga
