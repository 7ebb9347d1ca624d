#pragma once

#include <vector>

#include "rnsde/rng.hpp"
#include "rnsde/tensor.hpp"

namespace rnsde {

// Mean-reverting OU schedule. theta_bar[t] is cumulative, theta_bar[0] = 0,
// sigma2[t] / theta[t] == 2*lambda2 for every step.
struct DiffusionSchedule {
    int T = 0;
    double lambda2 = 0.0;
    std::vector<double> theta;      // theta'_t for t = 1..T (index t-1)
    std::vector<double> sigma2;     // sigma_t^2 = 2*lambda2*theta'_t
    std::vector<double> theta_bar;  // size T+1, theta_bar[0] = 0
    double dt = 1.0;

    double tb(int t) const { return theta_bar[static_cast<std::size_t>(t)]; }
    double th(int t) const { return theta[static_cast<std::size_t>(t - 1)]; }
    double sig2(int t) const { return sigma2[static_cast<std::size_t>(t - 1)]; }
};

enum class ScheduleKind { cosine };

DiffusionSchedule make_schedule(int T, double lambda2, ScheduleKind kind = ScheduleKind::cosine);

// Closed-form marginal p(x_t | x_0): mean mu + (x0-mu)e^{-tb}, variance
// lambda2 (1 - e^{-2 tb}).
struct Marginal {
    double mean_coef;  // e^{-theta_bar_t}, mean = mu + (x0-mu)*mean_coef
    double var;
};
Marginal forward_marginal(const DiffusionSchedule& sched, int t);
void forward_marginal(const Tensor& x0, const Tensor& mu, int t, const DiffusionSchedule& sched,
                      Tensor& mean_out, double& var_out);

// Draws x_t | x_s for s < t from the OU bridge.
Tensor forward_transition(const Tensor& x_s, const Tensor& mu, int s, int t,
                          const DiffusionSchedule& sched, Rng& rng);

// Posterior-step coefficients (t in 1..T).
// coef_a = G + theta'_t + 1 multiplies (x_t - mu) in the exact posterior mean.
struct ReverseCoeffs {
    double G;
    double H;
    double theta_prime;
    double coef_a;
};
ReverseCoeffs reverse_coeffs(const DiffusionSchedule& sched, int t);

// Exact conditional score of p(x_t | x_0): -(x_t - m_t(x0)) / v_t.
Tensor conditional_score(const Tensor& x_t, const Tensor& x0, const Tensor& mu, int t,
                         const DiffusionSchedule& sched);

// Posterior-matched score for a known x0:
//   (G_t x_t + H_t x0 - (H_t + G_t) mu) / (sigma_t^2 dt).
// This is the score the clean-state extraction inverts exactly; it agrees
// with conditional_score to first order in theta'_t and shares its minimizer.
Tensor optimal_score(const Tensor& x_t, const Tensor& x0, const Tensor& mu, int t,
                     const DiffusionSchedule& sched);
// Full-precision variant for oracle use (no fp32 rounding of the result).
std::vector<double> optimal_score_f64(const Tensor& x_t, const Tensor& x0, const Tensor& mu,
                                      int t, const DiffusionSchedule& sched);

// Per-step deviation between the one-step Euler discretization of the forward
// SDE and the exact OU transition, normalized by the state scale (|x - mu|
// for the mean coefficient, lambda2 for the variance).
struct CorrespondenceReport {
    double max_mean_dev = 0.0;
    double max_var_dev = 0.0;
    double max_var_dev_rel_increment = 0.0;  // vs the per-step variance itself
};
CorrespondenceReport ddpm_correspondence_check(const DiffusionSchedule& sched);

}  // namespace rnsde
