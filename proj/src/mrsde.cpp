#include "rnsde/mrsde.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rnsde {

DiffusionSchedule make_schedule(int T, double lambda2, ScheduleKind kind) {
    if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
    if (lambda2 <= 0.0) throw std::invalid_argument("make_schedule: lambda2 must be > 0");
    if (kind != ScheduleKind::cosine) throw std::invalid_argument("make_schedule: unknown kind");
    DiffusionSchedule s;
    s.T = T;
    s.lambda2 = lambda2;
    s.dt = 1.0;
    const double tb_T = std::log(1e4);  // e^{-tb_T} = 1e-4
    s.theta_bar.resize(static_cast<std::size_t>(T) + 1);
    for (int t = 0; t <= T; ++t)
        s.theta_bar[static_cast<std::size_t>(t)] =
            tb_T * (1.0 - std::cos(std::numbers::pi * t / T)) / 2.0;
    s.theta.resize(static_cast<std::size_t>(T));
    s.sigma2.resize(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
        const double th = s.tb(t) - s.tb(t - 1);
        s.theta[static_cast<std::size_t>(t - 1)] = th;
        s.sigma2[static_cast<std::size_t>(t - 1)] = 2.0 * lambda2 * th;
    }
    return s;
}

Marginal forward_marginal(const DiffusionSchedule& sched, int t) {
    if (t < 0 || t > sched.T) throw std::out_of_range("forward_marginal: t out of range");
    const double e = std::exp(-sched.tb(t));
    return Marginal{e, sched.lambda2 * (1.0 - e * e)};
}

void forward_marginal(const Tensor& x0, const Tensor& mu, int t, const DiffusionSchedule& sched,
                      Tensor& mean_out, double& var_out) {
    if (!x0.same_shape(mu)) throw std::invalid_argument("forward_marginal: shape mismatch");
    const Marginal m = forward_marginal(sched, t);
    mean_out = Tensor(x0.shape);
    for (std::size_t i = 0; i < x0.size(); ++i)
        mean_out[i] = static_cast<float>(mu[i] + (x0[i] - mu[i]) * m.mean_coef);
    var_out = m.var;
}

Tensor forward_transition(const Tensor& x_s, const Tensor& mu, int s, int t,
                          const DiffusionSchedule& sched, Rng& rng) {
    if (s >= t) throw std::invalid_argument("forward_transition: requires s < t");
    if (t > sched.T || s < 0) throw std::out_of_range("forward_transition: step out of range");
    if (!x_s.same_shape(mu)) throw std::invalid_argument("forward_transition: shape mismatch");
    const double gap = sched.tb(t) - sched.tb(s);
    const double e = std::exp(-gap);
    const double sd = std::sqrt(sched.lambda2 * (1.0 - e * e));
    Tensor out(x_s.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(mu[i] + (x_s[i] - mu[i]) * e + sd * rng.normal());
    return out;
}

ReverseCoeffs reverse_coeffs(const DiffusionSchedule& sched, int t) {
    if (t < 1 || t > sched.T) throw std::out_of_range("reverse_coeffs: t out of range");
    const double tb_t = sched.tb(t);
    const double tb_p = sched.tb(t - 1);
    const double thp = sched.th(t);
    const double denom = 1.0 - std::exp(-2.0 * tb_t);
    ReverseCoeffs rc;
    rc.theta_prime = thp;
    rc.G = (1.0 - std::exp(-2.0 * tb_p)) / denom * std::exp(-thp) - thp - 1.0;
    rc.H = (1.0 - std::exp(-2.0 * thp)) / denom * std::exp(-tb_p);
    rc.coef_a = rc.G + thp + 1.0;
    return rc;
}

Tensor conditional_score(const Tensor& x_t, const Tensor& x0, const Tensor& mu, int t,
                         const DiffusionSchedule& sched) {
    if (t < 1 || t > sched.T) throw std::out_of_range("conditional_score: t out of range");
    if (!x_t.same_shape(x0) || !x_t.same_shape(mu))
        throw std::invalid_argument("conditional_score: shape mismatch");
    const Marginal m = forward_marginal(sched, t);
    if (m.var <= 0.0) throw std::invalid_argument("conditional_score: degenerate variance");
    Tensor out(x_t.shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double mean = mu[i] + (x0[i] - mu[i]) * m.mean_coef;
        out[i] = static_cast<float>(-(x_t[i] - mean) / m.var);
    }
    return out;
}

Tensor optimal_score(const Tensor& x_t, const Tensor& x0, const Tensor& mu, int t,
                     const DiffusionSchedule& sched) {
    if (t < 1 || t > sched.T) throw std::out_of_range("optimal_score: t out of range");
    if (!x_t.same_shape(x0) || !x_t.same_shape(mu))
        throw std::invalid_argument("optimal_score: shape mismatch");
    const ReverseCoeffs rc = reverse_coeffs(sched, t);
    const double s2dt = sched.sig2(t) * sched.dt;
    Tensor out(x_t.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(
            (rc.G * x_t[i] + rc.H * x0[i] - (rc.H + rc.G) * mu[i]) / s2dt);
    return out;
}

std::vector<double> optimal_score_f64(const Tensor& x_t, const Tensor& x0, const Tensor& mu,
                                      int t, const DiffusionSchedule& sched) {
    if (t < 1 || t > sched.T) throw std::out_of_range("optimal_score_f64: t out of range");
    if (!x_t.same_shape(x0) || !x_t.same_shape(mu))
        throw std::invalid_argument("optimal_score_f64: shape mismatch");
    const ReverseCoeffs rc = reverse_coeffs(sched, t);
    const double s2dt = sched.sig2(t) * sched.dt;
    std::vector<double> out(x_t.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (rc.G * x_t[i] + rc.H * x0[i] - (rc.H + rc.G) * mu[i]) / s2dt;
    return out;
}

CorrespondenceReport ddpm_correspondence_check(const DiffusionSchedule& sched) {
    CorrespondenceReport rep;
    for (int t = 1; t <= sched.T; ++t) {
        const double thp = sched.th(t);
        // mean coefficient on (x_{t-1} - mu): exact e^{-thp}, Euler 1 - thp
        rep.max_mean_dev = std::max(rep.max_mean_dev, std::fabs(std::exp(-thp) - (1.0 - thp)));
        const double v_exact = sched.lambda2 * (1.0 - std::exp(-2.0 * thp));
        const double v_euler = sched.sig2(t) * sched.dt;
        rep.max_var_dev = std::max(rep.max_var_dev, std::fabs(v_euler - v_exact) / sched.lambda2);
        if (v_exact > 0.0)
            rep.max_var_dev_rel_increment =
                std::max(rep.max_var_dev_rel_increment, std::fabs(v_euler - v_exact) / v_exact);
    }
    return rep;
}

}  // namespace rnsde
