#include "rnsde/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rnsde/kernels.hpp"
#include "rnsde/rng.hpp"

namespace rnsde {

double psnr(const Tensor& x, const Tensor& ref, double peak) {
    if (x.shape != ref.shape) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - ref[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

std::vector<double> gauss_window_11() {
    std::vector<double> w(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable 11x11 Gaussian blur, valid region only.
Tensor blur_valid(const Tensor& img, const std::vector<double>& w) {
    const int h = static_cast<int>(img.shape[0]);
    const int wd = static_cast<int>(img.shape[1]);
    const int hv = h - 10, wv = wd - 10;
    Tensor tmp({h, wv});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < wv; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += w[k] * img.at(i, j + k);
            tmp.at(i, j) = static_cast<float>(acc);
        }
    Tensor out({hv, wv});
    for (int i = 0; i < hv; ++i)
        for (int j = 0; j < wv; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += w[k] * tmp.at(i + k, j);
            out.at(i, j) = static_cast<float>(acc);
        }
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    Tensor out(a.shape);
    kern::mul(a.data.data(), b.data.data(), out.data.data(), a.size());
    return out;
}

}  // namespace

double ssim(const Tensor& x, const Tensor& ref) {
    if (x.shape != ref.shape) throw std::invalid_argument("ssim: shape mismatch");
    if (x.shape.size() != 2 || x.shape[0] < 11 || x.shape[1] < 11)
        throw std::invalid_argument("ssim: image smaller than 11x11 window");
    static const std::vector<double> w = gauss_window_11();
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;

    Tensor mu1 = blur_valid(x, w);
    Tensor mu2 = blur_valid(ref, w);
    Tensor xx = blur_valid(hadamard(x, x), w);
    Tensor yy = blur_valid(hadamard(ref, ref), w);
    Tensor xy = blur_valid(hadamard(x, ref), w);

    double acc = 0.0;
    for (std::size_t i = 0; i < mu1.size(); ++i) {
        const double m1 = mu1[i], m2 = mu2[i];
        const double v1 = xx[i] - m1 * m1;
        const double v2 = yy[i] - m2 * m2;
        const double cov = xy[i] - m1 * m2;
        acc += ((2 * m1 * m2 + C1) * (2 * cov + C2)) /
               ((m1 * m1 + m2 * m2 + C1) * (v1 + v2 + C2));
    }
    return acc / static_cast<double>(mu1.size());
}

double consistency_error(const Tensor& x, const Sinogram& y) {
    Sinogram s = radon(x, y.geom);
    kern::sub(s.values.data.data(), y.values.data.data(), s.values.data.data(), s.values.size());
    return std::sqrt(kern::sumsq(s.values.data.data(), s.values.size()));
}

// Isotropic TV with forward differences (Neumann boundary).
double tv_value(const Tensor& x) {
    const int h = static_cast<int>(x.shape[0]), w = static_cast<int>(x.shape[1]);
    double acc = 0.0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double gx = (i + 1 < h) ? x.at(i + 1, j) - x.at(i, j) : 0.0;
            const double gy = (j + 1 < w) ? x.at(i, j + 1) - x.at(i, j) : 0.0;
            acc += std::sqrt(gx * gx + gy * gy);
        }
    return acc;
}

namespace {

// prox_{tau TV}(v): Chambolle's dual projection scheme.
Tensor tv_prox(const Tensor& v, double tau, int inner_iters) {
    const int h = static_cast<int>(v.shape[0]), w = static_cast<int>(v.shape[1]);
    Tensor px(v.shape), py(v.shape);  // dual field, zero-initialized
    Tensor div(v.shape), out(v.shape);
    const double step = 0.25;
    for (int it = 0; it < inner_iters; ++it) {
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double d = px.at(i, j) + py.at(i, j);
                if (i > 0) d -= px.at(i - 1, j);
                if (j > 0) d -= py.at(i, j - 1);
                div.at(i, j) = static_cast<float>(d);
            }
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] = static_cast<float>(div[k] - v[k] / tau);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const double gx = (i + 1 < h) ? out.at(i + 1, j) - out.at(i, j) : 0.0;
                const double gy = (j + 1 < w) ? out.at(i, j + 1) - out.at(i, j) : 0.0;
                const double denom = 1.0 + step * std::sqrt(gx * gx + gy * gy);
                px.at(i, j) = static_cast<float>((px.at(i, j) + step * gx) / denom);
                py.at(i, j) = static_cast<float>((py.at(i, j) + step * gy) / denom);
            }
    }
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double d = px.at(i, j) + py.at(i, j);
            if (i > 0) d -= px.at(i - 1, j);
            if (j > 0) d -= py.at(i, j - 1);
            out.at(i, j) = static_cast<float>(v.at(i, j) - tau * d);
        }
    return out;
}

double power_iteration_ata(const Geometry& geom, int n, int iters) {
    Rng rng(7);
    Tensor x({n, n});
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    double lam = 1.0;
    for (int it = 0; it < iters; ++it) {
        Sinogram s = radon(x, geom);
        Tensor y = backproject(s, n, n);
        lam = std::sqrt(kern::sumsq(y.data.data(), y.size()));
        if (lam == 0.0) return 1.0;
        kern::scale(static_cast<float>(1.0 / lam), 0.0f, y.data.data(), x.data.data(), x.size());
    }
    return lam;
}

double fidelity(const Tensor& x, const Sinogram& y) {
    Sinogram s = radon(x, y.geom);
    kern::sub(s.values.data.data(), y.values.data.data(), s.values.data.data(), s.values.size());
    return 0.5 * kern::sumsq(s.values.data.data(), s.values.size());
}

}  // namespace

Tensor tv_reconstruct(const Sinogram& y, int image_n, double lambda_tv, int iters) {
    if (lambda_tv < 0.0) throw std::invalid_argument("tv_reconstruct: lambda_tv must be >= 0");
    const double L = power_iteration_ata(y.geom, image_n, 20);
    double step = 0.9 / L;

    Tensor x = fbp(y, image_n);
    double obj = fidelity(x, y) + lambda_tv * tv_value(x);
    if (!std::isfinite(obj)) {
        x = Tensor({image_n, image_n});
        obj = fidelity(x, y);
    }

    for (int it = 0; it < iters; ++it) {
        Sinogram s = radon(x, y.geom);
        kern::sub(s.values.data.data(), y.values.data.data(), s.values.data.data(),
                  s.values.size());
        Tensor grad = backproject(s, image_n, image_n);

        bool accepted = false;
        for (int ls = 0; ls < 8; ++ls) {
            Tensor v(x.shape);
            for (std::size_t k = 0; k < v.size(); ++k)
                v[k] = static_cast<float>(x[k] - step * grad[k]);
            Tensor cand = (lambda_tv > 0.0) ? tv_prox(v, step * lambda_tv, 15) : std::move(v);
            const double cand_obj = fidelity(cand, y) + lambda_tv * tv_value(cand);
            if (!std::isfinite(cand_obj)) throw std::runtime_error("tv_reconstruct: diverged");
            if (cand_obj <= obj + 1e-9 * (1.0 + std::abs(obj))) {
                x = std::move(cand);
                obj = cand_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // stuck at line-search floor; current x is the answer
    }
    return x;
}

namespace {

MethodScores score_image(const Tensor& rec, const Tensor& truth, const Sinogram& y) {
    MethodScores s;
    s.psnr = psnr(rec, truth);
    s.ssim = ssim(rec, truth);
    s.consistency = consistency_error(rec, y);
    return s;
}

void accumulate(MethodScores& acc, const MethodScores& s, double w) {
    const double p = std::isinf(s.psnr) ? 100.0 : s.psnr;  // cap so averages stay finite
    acc.psnr += w * p;
    acc.ssim += w * s.ssim;
    acc.consistency += w * s.consistency;
}

}  // namespace

MetricReport run_experiment(const std::vector<Tensor>& test_images, ScoreFunction& score,
                            const std::map<int, const LearnablePinv*>& pinvs,
                            const DiffusionSchedule& sched, const ExperimentConfig& cfg) {
    if (test_images.empty()) throw std::invalid_argument("run_experiment: empty test set");
    MetricReport report;
    report.seed = cfg.seed;
    const int n = static_cast<int>(test_images[0].shape[0]);
    Rng seeder(cfg.seed);

    for (int theta : cfg.theta_miss) {
        auto it = pinvs.find(theta);
        if (it == pinvs.end())
            throw std::runtime_error("run_experiment: missing pinv checkpoint for theta_miss=" +
                                     std::to_string(theta));
        const LearnablePinv& pinv = *it->second;
        const Geometry geom = make_geometry(n, theta, cfg.angle_step_deg);

        std::map<std::string, MethodScores> agg;
        const double wimg = 1.0 / static_cast<double>(test_images.size());

        for (std::size_t idx = 0; idx < test_images.size(); ++idx) {
            const Tensor& truth = test_images[idx];
            const Sinogram y = radon(truth, geom);
            const Tensor mu = fbp(y, n);

            auto record = [&](const std::string& method, const MethodScores& s) {
                report.per_image.push_back({method, theta, static_cast<int>(idx), s});
                accumulate(agg[method], s, wimg);
            };

            record("fbp", score_image(mu, truth, y));
            record("tv", score_image(tv_reconstruct(y, n, cfg.lambda_tv, cfg.tv_iters), truth, y));
            record("pinv", score_image(pinv.apply(y), truth, y));

            MethodScores plain{}, rect{}, sa{};
            const double wrun = 1.0 / static_cast<double>(cfg.sampler_runs);
            for (int run = 0; run < cfg.sampler_runs; ++run) {
                SamplerConfig sc = cfg.sampler;
                sc.seed = seeder.next_u64();
                SampleResult no_rect = sample(y, mu, score, nullptr, sched, sc);
                accumulate(plain, score_image(no_rect.image, truth, y), wrun);

                sc.seed = seeder.next_u64();
                SampleResult with_rect = sample(y, mu, score, &pinv, sched, sc);
                accumulate(rect, score_image(with_rect.image, truth, y), wrun);

                sc.seed = seeder.next_u64();
                sc.sa_count = cfg.sa_count;
                Tensor avg = sample_average(y, mu, score, &pinv, sched, sc);
                accumulate(sa, score_image(avg, truth, y), wrun);
            }
            record("rnsde", plain);
            record("rnsde_rect", rect);
            record("rnsde_sa", sa);
        }
        for (auto& [method, scores] : agg) report.aggregate[method][theta] = scores;
    }
    return report;
}

}  // namespace rnsde
