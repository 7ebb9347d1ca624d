#include "rnsde/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rnsde {

double AdamW::current_lr() const {
    if (cfg_.total_steps <= 0) return cfg_.lr;
    const double frac = std::min(1.0, static_cast<double>(t_) / cfg_.total_steps);
    return cfg_.lr_min +
           0.5 * (cfg_.lr - cfg_.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

void AdamW::step(ParamStore& store) {
    const double lr = current_lr();
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (auto& [name, e] : store.entries()) {
        auto it = moments_.find(name);
        if (it == moments_.end())
            it = moments_.emplace(name, Moments{Tensor(e.value.shape), Tensor(e.value.shape)}).first;
        Tensor& m = it->second.m;
        Tensor& v = it->second.v;
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad[i];
            if (!std::isfinite(g)) throw std::runtime_error("NaN gradient in " + name);
            const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            double p = e.value[i];
            p -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p);
            e.value[i] = static_cast<float>(p);
        }
    }
}

}  // namespace rnsde
