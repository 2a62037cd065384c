#include "jga/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace jga {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        check(d > 0, "tensor dims must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
    check(shape_.size() >= 1 && shape_.size() <= 5, "tensor rank must be 1..5");
    data_.assign(shape_numel(shape_), fill);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
}

} // namespace jga
