#include "jga/nn/params.hpp"

#include <cmath>

namespace jga {

Param& ParamStore::create(const std::string& name, const std::vector<int>& shape) {
    auto [it, inserted] = params_.emplace(name, Param{Tensor(shape), Tensor(shape)});
    check(inserted, "duplicate parameter name: " + name);
    return it->second;
}

Param& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    check(it != params_.end(), "unknown parameter: " + name);
    return it->second;
}

const Param& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    check(it != params_.end(), "unknown parameter: " + name);
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [name, p] : params_) p.grad.fill(0.0);
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
}

void kaiming_init(Tensor& t, int fan_in, Rng& rng) {
    check(fan_in > 0, "kaiming_init needs positive fan_in");
    double bound = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

void Adam::step(ParamStore& store) {
    ++step_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (auto& [name, p] : store.all()) {
        auto it = moments_.find(name);
        if (it == moments_.end())
            it = moments_.emplace(name, std::make_pair(Tensor::zeros_like(p.value),
                                                       Tensor::zeros_like(p.value))).first;
        Tensor& m = it->second.first;
        Tensor& v = it->second.second;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            double g = p.grad[i];
            check(std::isfinite(g), "non-finite gradient in parameter " + name);
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

} // namespace jga
