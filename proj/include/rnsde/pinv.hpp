#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rnsde/autodiff.hpp"
#include "rnsde/rng.hpp"
#include "rnsde/tensor.hpp"
#include "rnsde/tomo.hpp"

namespace rnsde {

struct PinvConfig {
    int postproc_width = 16;
    int postproc_blocks = 3;
};

// Learnable Radon pseudo-inverse: per-frequency ramp gains (log-space,
// initialized to zero so the gain starts at the Ram-Lak response) followed by
// back-projection and a bias-free residual conv post-processor. At
// initialization the whole operator equals fbp().
class LearnablePinv {
  public:
    LearnablePinv(Geometry geom, int image_size, PinvConfig cfg, Rng& init_rng);

    Tensor apply(const Sinogram& sino) const;
    // Tape variant: sino enters as a node so gradients flow through the
    // filter, back-projection and post-processor.
    ad::V apply_tape(ad::Tape& tape, ad::V sino_node) const;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const Geometry& geometry() const { return geom_; }
    int image_size() const { return size_; }
    int num_freqs() const { return nfreq_; }
    int padded_len() const { return npad_; }
    const std::vector<double>& base_gain() const { return base_gain_; }

    void save(const std::string& path) const;
    static LearnablePinv load(const std::string& path);

  private:
    Geometry geom_;
    int size_;
    PinvConfig cfg_;
    int npad_;
    int nfreq_;                     // npad/2 + 1 independent gains
    std::vector<double> base_gain_; // Ram-Lak frequency response, length npad
    ParamStore params_;
};

struct PinvLossConfig {
    double alpha_pinv = 0.0;  // Eq-22 style weighting in [0,1]
};

struct PinvLossResult {
    double loss = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
};

// L1 consistency losses: l1 = |Ax - A P A x|, l2 = |P y - P A P y| with
// y = A x; gradients accumulate into model.params().
PinvLossResult pinv_loss(const std::vector<Tensor>& batch_x0, LearnablePinv& model,
                         const PinvLossConfig& cfg);

struct TrainPinvConfig {
    int phase1_steps = 3000;
    int phase2_steps = 1000;
    double phase2_alpha = 0.2;
    int batch = 2;
    double lr = 5e-4;
    unsigned long long seed = 0;
};

struct TrainPinvReport {
    std::vector<double> loss_curve;
    std::vector<double> l1_curve;
    std::vector<double> alpha_schedule;  // [0, phase2_alpha]
    double best_l1 = 0.0;
};

TrainPinvReport train_pinv(const std::vector<Tensor>& dataset, LearnablePinv& model,
                           const TrainPinvConfig& cfg);

// Range-null decomposition helpers; range + null == x bitwise.
Tensor range_project(const Tensor& x, const LearnablePinv& pinv);
Tensor null_project(const Tensor& x, const LearnablePinv& pinv);

// x - gamma * P(A x - y)
Tensor rectify(const Tensor& x0t, const Sinogram& y, const LearnablePinv& pinv, double gamma);

// Generic forms for arbitrary operator pairs (used with exact toy operators).
using LinearFn = std::function<Tensor(const Tensor&)>;
Tensor rectify_generic(const Tensor& x0t, const Tensor& y, const LinearFn& fwd,
                       const LinearFn& pinv_fn, double gamma);

// Exactly invertible toy operator: keeps a subset of coordinates;
// pseudo-inverse is transpose embedding (Moore-Penrose).
struct MaskingOp {
    std::size_t n = 0;
    std::vector<std::size_t> kept;
    Tensor apply(const Tensor& x) const;
    Tensor pinv(const Tensor& y) const;
};

}  // namespace rnsde
