#pragma once

#include <initializer_list>
#include <vector>

#include "jga/common.hpp"

namespace jga {

// Dense tensor of doubles, rank up to 5, row-major.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0);
    Tensor(std::initializer_list<int> shape, double fill = 0.0)
        : Tensor(std::vector<int>(shape), fill) {}

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::size_t shape_numel(const std::vector<int>& shape);

} // namespace jga
