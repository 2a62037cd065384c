#pragma once

#include <map>
#include <string>

#include "jga/nn/rng.hpp"
#include "jga/nn/tensor.hpp"

namespace jga {

struct Param {
    Tensor value;
    Tensor grad;
};

// Named parameter map. std::map keeps iteration order deterministic, which
// training, checkpointing and the optimizer all rely on.
class ParamStore {
public:
    Param& create(const std::string& name, const std::vector<int>& shape);
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) > 0; }

    std::map<std::string, Param>& all() { return params_; }
    const std::map<std::string, Param>& all() const { return params_; }

    void zero_grad();
    std::size_t parameter_count() const;

private:
    std::map<std::string, Param> params_;
};

// Kaiming-uniform fan-in fill: U(-b, b) with b = sqrt(6 / fan_in).
void kaiming_init(Tensor& t, int fan_in, Rng& rng);

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // One update over every parameter in the store. Aborts on non-finite
    // gradients, naming the parameter.
    void step(ParamStore& store);

    std::int64_t steps_taken() const { return step_; }
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t step_ = 0;
    std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

} // namespace jga
