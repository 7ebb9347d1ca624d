#pragma once

#include <map>
#include <string>
#include <vector>

#include "rnsde/pinv.hpp"
#include "rnsde/sampler.hpp"
#include "rnsde/score.hpp"
#include "rnsde/tensor.hpp"
#include "rnsde/tomo.hpp"

namespace rnsde {

// 10 log10(peak^2 / MSE); identical images return +infinity.
double psnr(const Tensor& x, const Tensor& ref, double peak = 1.0);

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), C1=0.01^2, C2=0.03^2 at peak 1.
double ssim(const Tensor& x, const Tensor& ref);

// ||radon(x) - y||_2 over the kept angles.
double consistency_error(const Tensor& x, const Sinogram& y);

// Proximal-gradient solve of 1/2 ||Ax-y||^2 + lambda_tv * TV(x) (isotropic TV,
// Chambolle dual prox). Step size from power iteration on A^T A; the objective
// is kept non-increasing by halving the step on a bad iterate.
Tensor tv_reconstruct(const Sinogram& y, int image_n, double lambda_tv, int iters);

// Isotropic total variation (forward differences, Neumann boundary).
double tv_value(const Tensor& x);

struct MethodScores {
    double psnr = 0.0;
    double ssim = 0.0;
    double consistency = 0.0;
};

struct PerImageScore {
    std::string method;
    int theta_miss;
    int image_index;
    MethodScores scores;
};

struct MetricReport {
    // aggregate[method][theta_miss]
    std::map<std::string, std::map<int, MethodScores>> aggregate;
    std::vector<PerImageScore> per_image;
    unsigned long long seed = 0;
};

struct ExperimentConfig {
    std::vector<int> theta_miss = {60, 90, 120};
    double angle_step_deg = 1.0;
    double lambda_tv = 5e-4;
    int tv_iters = 80;
    int sampler_runs = 10;  // per-image seeds averaged for the diffusion rows
    int sa_count = 4;
    SamplerConfig sampler;
    unsigned long long seed = 0;
};

// Evaluates {fbp, tv, pinv, rnsde, rnsde_rect, rnsde_sa} on the given test
// images for each missing wedge. pinvs maps theta_miss -> trained model and
// must cover every entry of cfg.theta_miss.
MetricReport run_experiment(const std::vector<Tensor>& test_images, ScoreFunction& score,
                            const std::map<int, const LearnablePinv*>& pinvs,
                            const DiffusionSchedule& sched, const ExperimentConfig& cfg);

}  // namespace rnsde
