#include "rnsde/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rnsde/kernels.hpp"

namespace rnsde {

long time_travel_steps(int T, int l, int r) {
    if (T < 1 || l < 1 || r < 1) throw std::invalid_argument("time_travel_steps: bad parameters");
    return static_cast<long>(T) + 2L * l * (r - 1) * ((T - 1) / l) + 1;
}

Tensor extract_x0(const Tensor& x_t, const Tensor& mu, int t, ScoreFunction& score,
                  const DiffusionSchedule& sched) {
    const ReverseCoeffs rc = reverse_coeffs(sched, t);
    if (rc.H == 0.0) throw std::runtime_error("extract_x0: H_t == 0");
    std::vector<double> s = score.evaluate_precise(x_t, mu, t);
    const double gh = rc.G / rc.H;
    const double sh = sched.sig2(t) * sched.dt / rc.H;
    Tensor out(x_t.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(-gh * x_t[i] + sh * s[i] + (1.0 + gh) * mu[i]);
    return out;
}

Tensor reverse_step(const Tensor& x_t, const Tensor& x0_hat, const Tensor& mu, int t,
                    const DiffusionSchedule& sched, Rng& rng, bool inject_noise) {
    const ReverseCoeffs rc = reverse_coeffs(sched, t);
    const double sd = (t > 1 && inject_noise) ? std::sqrt(sched.sig2(t) * sched.dt) : 0.0;
    Tensor out(x_t.shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = rc.coef_a * (x_t[i] - mu[i]) + rc.H * (x0_hat[i] - mu[i]) + mu[i];
        if (sd > 0.0) v += sd * rng.normal();
        out[i] = static_cast<float>(v);
    }
    return out;
}

namespace {

double consistency(const Tensor& img, const Sinogram& y) {
    Sinogram s = radon(img, y.geom);
    kern::sub(s.values.data.data(), y.values.data.data(), s.values.data.data(), s.values.size());
    return std::sqrt(kern::sumsq(s.values.data.data(), s.values.size()));
}

struct Stepper {
    const std::optional<Sinogram>& y;
    const Tensor& mu;
    ScoreFunction& score;
    const LearnablePinv* pinv;
    const DiffusionSchedule& sched;
    const SamplerConfig& cfg;
    SampleTrace& trace;

    // one reverse step t -> t-1, with optional rectification
    Tensor operator()(const Tensor& x_t, int t, Rng& rng) const {
        Tensor x0t = extract_x0(x_t, mu, t, score, sched);
        for (auto& v : x0t.data)
            v = std::clamp(v, static_cast<float>(cfg.clip_lo), static_cast<float>(cfg.clip_hi));
        bool rectified = false;
        if (pinv && y && t % cfg.skip_beta != 0) {
            const ReverseCoeffs rc = reverse_coeffs(sched, t);
            double gamma = cfg.rescale_alpha * std::sqrt(sched.sig2(t) * sched.dt) / rc.H;
            gamma = std::clamp(gamma, 0.0, 1.0);
            x0t = rectify(x0t, *y, *pinv, gamma);
            // the rectified value is still a clean-state estimate; keep it in range
            for (auto& v : x0t.data)
                v = std::clamp(v, static_cast<float>(cfg.clip_lo), static_cast<float>(cfg.clip_hi));
            rectified = true;
        }
        double err = std::numeric_limits<double>::quiet_NaN();
        if (y) err = consistency(x0t, *y);
        trace.records.push_back({t, err, rectified, 'r'});
        Tensor next = reverse_step(x_t, x0t, mu, t, rng, cfg.inject_noise);
        if (!next.all_finite()) throw std::runtime_error("sample: NaN state at t=" + std::to_string(t));
        return next;
    }

    Tensor reverse_step(const Tensor& x_t, const Tensor& x0_hat, const Tensor& m, int t, Rng& rng,
                        bool noise) const {
        return rnsde::reverse_step(x_t, x0_hat, m, t, sched, rng, noise);
    }
};

}  // namespace

SampleResult sample(const std::optional<Sinogram>& y, const Tensor& mu, ScoreFunction& score,
                    const LearnablePinv* pinv, const DiffusionSchedule& sched,
                    const SamplerConfig& cfg) {
    if (cfg.skip_beta < 1 || cfg.travel_l < 1 || cfg.travel_r < 1)
        throw std::invalid_argument("sample: bad sampler config");
    if (pinv && y && !(y->geom == pinv->geometry()))
        throw std::invalid_argument("sample: sinogram/pinv geometry mismatch");
    const int T = sched.T;
    Rng rng(cfg.seed);

    SampleResult res;
    res.trace.seed = cfg.seed;

    // x_T ~ N(mu, lambda2)
    Tensor x(mu.shape);
    const double sd0 = cfg.inject_noise ? std::sqrt(sched.lambda2) : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = static_cast<float>(mu[i] + sd0 * rng.normal());
    res.trace.records.push_back({T, std::numeric_limits<double>::quiet_NaN(), false, 'i'});

    Stepper step{y, mu, score, pinv, sched, cfg, res.trace};

    for (int t = T; t >= 1; --t) {
        x = step(x, t, rng);
        const int now = t - 1;
        // redo the last block of travel_l steps, (r-1) times
        if (cfg.travel_r > 1 && now >= 1 && now < T && (T - now) % cfg.travel_l == 0) {
            for (int rep = 1; rep < cfg.travel_r; ++rep) {
                x = forward_transition(x, mu, now, now + cfg.travel_l, sched, rng);
                for (int k = 0; k < cfg.travel_l; ++k)
                    res.trace.records.push_back(
                        {now + cfg.travel_l - k, std::numeric_limits<double>::quiet_NaN(), false, 'f'});
                for (int tt = now + cfg.travel_l; tt > now; --tt) x = step(x, tt, rng);
            }
        }
    }
    res.image = std::move(x);
    return res;
}

Tensor sample_average(const std::optional<Sinogram>& y, const Tensor& mu, ScoreFunction& score,
                      const LearnablePinv* pinv, const DiffusionSchedule& sched,
                      const SamplerConfig& cfg) {
    if (cfg.sa_count < 1) throw std::invalid_argument("sample_average: sa_count must be >= 1");
    Tensor acc(mu.shape);
    for (int i = 0; i < cfg.sa_count; ++i) {
        SamplerConfig c = cfg;
        c.seed = cfg.seed + static_cast<unsigned long long>(i) * 0x9e3779b97f4a7c15ull;
        SampleResult r = sample(y, mu, score, pinv, sched, c);
        kern::axpy(1.0f, r.image.data.data(), acc.data.data(), acc.size());
    }
    const float inv = 1.0f / static_cast<float>(cfg.sa_count);
    kern::scale(inv, 0.0f, acc.data.data(), acc.data.data(), acc.size());
    return acc;
}

}  // namespace rnsde
