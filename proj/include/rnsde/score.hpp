#pragma once

#include <vector>

#include "rnsde/autodiff.hpp"
#include "rnsde/mrsde.hpp"
#include "rnsde/optim.hpp"
#include "rnsde/rng.hpp"
#include "rnsde/tensor.hpp"

namespace rnsde {

// Common contract: s(x_t, mu, t) -> score estimate, shape preserved.
// Analytic scores can override evaluate_precise to avoid the fp32 round-trip;
// the clean-state extraction divides the score by H_t, which near t = T
// magnifies storage rounding by several orders of magnitude.
struct ScoreFunction {
    virtual ~ScoreFunction() = default;
    virtual Tensor evaluate(const Tensor& x_t, const Tensor& mu, int t) = 0;
    virtual std::vector<double> evaluate_precise(const Tensor& x_t, const Tensor& mu, int t) {
        Tensor s = evaluate(x_t, mu, t);
        return std::vector<double>(s.data.begin(), s.data.end());
    }
};

// Exact marginal score when x0 has a diagonal Gaussian prior N(m0, var0):
// p(x_t) = N(mu + (m0-mu)e^{-tb}, e^{-2tb} var0 + v_t).
class GaussianOracle : public ScoreFunction {
  public:
    GaussianOracle(Tensor m0, Tensor var0, const DiffusionSchedule& sched);
    Tensor evaluate(const Tensor& x_t, const Tensor& mu, int t) override;

  private:
    Tensor m0_;
    Tensor var0_;
    const DiffusionSchedule* sched_;
};

// Deterministic sinusoidal embedding; dim must be even.
// Layout: [sin(t*w_0) .. sin(t*w_{d/2-1}), cos(t*w_0) .. cos(t*w_{d/2-1})].
Tensor time_embedding(int t, int dim);

struct DenoiserConfig {
    int width = 32;
    int blocks = 4;
    int emb_dim = 32;
    float dropout = 0.1f;
};

// Small residual conv denoiser, time-conditioned at both the input and
// output stages. Consumes concat(x_t, mu); predicts the noise eps-hat.
// Score = -eps / sqrt(v_t).
class CondDenoiser : public ScoreFunction {
  public:
    CondDenoiser(DenoiserConfig cfg, const DiffusionSchedule& sched, Rng& init_rng);

    Tensor evaluate(const Tensor& x_t, const Tensor& mu, int t) override;
    Tensor predict_eps(const Tensor& x_t, const Tensor& mu, int t);
    // Builds the tape graph; returns the eps-hat node.
    ad::V forward(ad::Tape& tape, const Tensor& x_t, const Tensor& mu, int t, bool training,
                  Rng* dropout_rng);

    ParamStore& params() { return params_; }
    const DenoiserConfig& config() const { return cfg_; }
    const DiffusionSchedule& schedule() const { return *sched_; }

  private:
    DenoiserConfig cfg_;
    const DiffusionSchedule* sched_;
    ParamStore params_;
};

struct PairedSample {
    Tensor x0;
    Tensor mu;
};

struct TrainScoreConfig {
    int steps = 2000;
    int batch = 4;
    double lr = 5e-4;
    double weight_decay = 0.0;
    unsigned long long seed = 0;
};

// Denoising score matching with t ~ U{1..T}; returns the per-step loss curve.
std::vector<double> train_score(const std::vector<PairedSample>& dataset,
                                const DiffusionSchedule& sched, CondDenoiser& model,
                                const TrainScoreConfig& cfg);

}  // namespace rnsde
