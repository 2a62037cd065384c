#pragma once

#include "jga/nn/networks.hpp"

namespace jga {

// Post-decode residual touch-up of attribute features. Coordinates pass
// through untouched; the zero-initialized head makes the untrained model an
// identity.
class RefineModel {
public:
    RefineModel(int attr_channels, std::uint64_t seed, int width = 16, int blocks = 2);

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    SparseVoxelTensor forward(const SparseVoxelTensor& decoded);
    // Gradient w.r.t. the input features.
    SparseVoxelTensor backward(const SparseVoxelTensor& dout);

private:
    ParamStore params_;
    std::unique_ptr<SparseResNet> net_;
};

} // namespace jga
