#pragma once

#include <map>
#include <string>

#include "rnsde/tensor.hpp"

namespace rnsde {

// AdamW with optional cosine-annealing learning-rate schedule.
struct OptimizerConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    int total_steps = 0;   // > 0 enables cosine annealing down to lr_min
    double lr_min = 0.0;
};

class AdamW {
  public:
    explicit AdamW(OptimizerConfig cfg) : cfg_(cfg) {}

    // Applies one update from the gradients in `store`; throws on NaN grads.
    void step(ParamStore& store);

    long step_count() const { return t_; }
    double current_lr() const;

  private:
    struct Moments {
        Tensor m;
        Tensor v;
    };
    OptimizerConfig cfg_;
    std::map<std::string, Moments> moments_;
    long t_ = 0;
};

}  // namespace rnsde
