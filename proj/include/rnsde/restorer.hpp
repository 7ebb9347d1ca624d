#pragma once

#include <vector>

#include "rnsde/autodiff.hpp"
#include "rnsde/rng.hpp"
#include "rnsde/tensor.hpp"

namespace rnsde {

struct RestorerConfig {
    int width = 32;
    int blocks = 4;
    float dropout = 0.1f;
};

// MMSE post-processor: maps a streaky FBP reconstruction toward the clean
// image. Same residual gated-conv blocks as the denoiser, but no time
// conditioning; the output stage is zero-initialized so the untrained model
// is the identity on its input.
class Restorer {
  public:
    Restorer(RestorerConfig cfg, Rng& init_rng);

    Tensor restore(const Tensor& fbp_img) const;
    ad::V forward(ad::Tape& tape, const Tensor& fbp_img, bool training, Rng* dropout_rng);

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const RestorerConfig& config() const { return cfg_; }

  private:
    RestorerConfig cfg_;
    ParamStore params_;
};

struct RestorerPair {
    Tensor fbp;
    Tensor gt;
};

struct TrainRestorerConfig {
    int steps = 1500;
    int batch = 4;
    double lr = 1e-3;
    double weight_decay = 0.0;
    int val_interval = 50;
    unsigned long long seed = 0;
};

// L2 training; the checkpoint with the best validation loss is restored into
// the model at the end. NaN loss aborts. Returns the per-step training curve.
std::vector<double> train_restorer(const std::vector<RestorerPair>& train_set,
                                   const std::vector<RestorerPair>& val_set, Restorer& model,
                                   const TrainRestorerConfig& cfg);

}  // namespace rnsde
