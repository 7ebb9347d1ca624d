#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rnsde/mrsde.hpp"
#include "rnsde/pinv.hpp"
#include "rnsde/score.hpp"
#include "rnsde/tensor.hpp"
#include "rnsde/tomo.hpp"

namespace rnsde {

struct SamplerConfig {
    double rescale_alpha = 0.5;  // Gamma_t = alpha * sigma_t * sqrt(dt) / H_t, clamped to [0,1]
    int skip_beta = 3;           // rectify iff t mod beta != 0
    int travel_l = 1;
    int travel_r = 1;            // r == 1 disables time travel
    int sa_count = 1;
    unsigned long long seed = 0;
    bool inject_noise = true;    // false: deterministic mean trajectory (diagnostics)
    // Clean-state estimates are clamped to [clip_lo, clip_hi] before use.
    // Early in the reverse pass an imperfect score is amplified by ~e^{tb_t},
    // and unclamped estimates can blow up the (nonlinear) pseudo-inverse.
    double clip_lo = -1.0;
    double clip_hi = 2.0;
};

struct TraceRecord {
    int t;
    double consistency_error;  // ||A x_{0|t} - y||_2 at this step (NaN on travel records)
    bool rectified;
    char phase;  // 'i' init, 'r' reverse, 'f' forward travel
};

struct SampleTrace {
    std::vector<TraceRecord> records;
    unsigned long long seed = 0;
};

// Total time-steps traversed with time travel (Table-III iteration count):
// T + 2 l (r-1) floor((T-1)/l) + 1.
long time_travel_steps(int T, int l, int r);

// x_{0|t} = -(G/H) x_t + (sigma^2/H) s(x_t,mu,t) dt + (1 + G/H) mu
Tensor extract_x0(const Tensor& x_t, const Tensor& mu, int t, ScoreFunction& score,
                  const DiffusionSchedule& sched);

// x_{t-1} = coef_a (x_t - mu) + H (x0_hat - mu) + mu + sigma sqrt(dt) eps;
// the t == 1 step is deterministic.
Tensor reverse_step(const Tensor& x_t, const Tensor& x0_hat, const Tensor& mu, int t,
                    const DiffusionSchedule& sched, Rng& rng, bool inject_noise = true);

struct SampleResult {
    Tensor image;
    SampleTrace trace;
};

// Full RN-SDE reverse sampler. Pass pinv == nullptr (or y == nullopt) to
// sample without rectification.
SampleResult sample(const std::optional<Sinogram>& y, const Tensor& mu, ScoreFunction& score,
                    const LearnablePinv* pinv, const DiffusionSchedule& sched,
                    const SamplerConfig& cfg);

// Pixel-wise mean of sa_count independent runs (seeds derived from cfg.seed).
Tensor sample_average(const std::optional<Sinogram>& y, const Tensor& mu, ScoreFunction& score,
                      const LearnablePinv* pinv, const DiffusionSchedule& sched,
                      const SamplerConfig& cfg);

}  // namespace rnsde
