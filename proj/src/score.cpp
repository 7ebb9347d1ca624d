#include "rnsde/score.hpp"

#include <cmath>
#include <stdexcept>

namespace rnsde {

GaussianOracle::GaussianOracle(Tensor m0, Tensor var0, const DiffusionSchedule& sched)
    : m0_(std::move(m0)), var0_(std::move(var0)), sched_(&sched) {
    if (!m0_.same_shape(var0_)) throw std::invalid_argument("oracle: shape mismatch");
    for (float v : var0_.data)
        if (v < 0.0f) throw std::invalid_argument("oracle: negative variance");
}

Tensor GaussianOracle::evaluate(const Tensor& x_t, const Tensor& mu, int t) {
    if (!x_t.same_shape(m0_) || !x_t.same_shape(mu))
        throw std::invalid_argument("oracle: shape mismatch");
    const Marginal m = forward_marginal(*sched_, t);
    Tensor out(x_t.shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double mean = mu[i] + (m0_[i] - mu[i]) * m.mean_coef;
        const double var = var0_[i] * m.mean_coef * m.mean_coef + m.var;
        if (var <= 0.0) throw std::invalid_argument("oracle: degenerate marginal variance");
        out[i] = static_cast<float>(-(x_t[i] - mean) / var);
    }
    return out;
}

Tensor time_embedding(int t, int dim) {
    if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("time_embedding: dim must be even");
    Tensor e({dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double w = std::pow(10000.0, -static_cast<double>(i) / half);
        e[static_cast<std::size_t>(i)] = static_cast<float>(std::sin(t * w));
        e[static_cast<std::size_t>(half + i)] = static_cast<float>(std::cos(t * w));
    }
    return e;
}

namespace {

Tensor randn(std::vector<int> shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(stddev * rng.normal());
    return t;
}

// He-style fan-in init for conv kernels. `gain` damps residual branches:
// the gating multiply squares activation scales, and without normalization
// layers an undamped stack blows up geometrically with depth.
Tensor conv_init(int K, int C, int kh, int kw, Rng& rng, double gain = 1.0) {
    const double std = gain * std::sqrt(2.0 / (static_cast<double>(C) * kh * kw));
    return randn({K, C, kh, kw}, std, rng);
}

}  // namespace

CondDenoiser::CondDenoiser(DenoiserConfig cfg, const DiffusionSchedule& sched, Rng& init_rng)
    : cfg_(cfg), sched_(&sched) {
    const int C = cfg_.width, E = cfg_.emb_dim;
    params_.add("in.w", conv_init(C, 2, 3, 3, init_rng));
    params_.add("in.b", Tensor({C}));
    params_.add("in.ts.w", randn({C, E}, 0.01, init_rng));
    params_.add("in.ts.b", Tensor({C}));
    params_.add("in.tb.w", randn({C, E}, 0.01, init_rng));
    params_.add("in.tb.b", Tensor({C}));
    for (int b = 0; b < cfg_.blocks; ++b) {
        const std::string p = "blk" + std::to_string(b);
        params_.add(p + ".c1.w", conv_init(2 * C, C, 3, 3, init_rng));
        params_.add(p + ".c1.b", Tensor({2 * C}));
        params_.add(p + ".c2.w", conv_init(C, C, 3, 3, init_rng, 0.25));
        params_.add(p + ".c2.b", Tensor({C}));
        if (b == 0 || b == cfg_.blocks - 1) {
            params_.add(p + ".ts.w", randn({C, E}, 0.01, init_rng));
            params_.add(p + ".ts.b", Tensor({C}));
            params_.add(p + ".tb.w", randn({C, E}, 0.01, init_rng));
            params_.add(p + ".tb.b", Tensor({C}));
        }
    }
    params_.add("out.w", Tensor({1, C, 3, 3}));  // zero head: fresh model predicts zero noise
    params_.add("out.b", Tensor({1}));
}

ad::V CondDenoiser::forward(ad::Tape& tape, const Tensor& x_t, const Tensor& mu, int t,
                            bool training, Rng* dropout_rng) {
    if (!x_t.same_shape(mu)) throw std::invalid_argument("denoiser: shape mismatch");
    if (x_t.ndim() != 2) throw std::invalid_argument("denoiser: expects 2-D images");
    const int H = x_t.dim(0), W = x_t.dim(1);

    Tensor stacked({2, H, W});
    std::copy(x_t.data.begin(), x_t.data.end(), stacked.data.begin());
    std::copy(mu.data.begin(), mu.data.end(), stacked.data.begin() + x_t.size());
    ad::V x = tape.leaf(std::move(stacked));
    ad::V emb = tape.leaf(time_embedding(t, cfg_.emb_dim));

    auto inject = [&](ad::V h, const std::string& p) {
        ad::V s = tape.linear(emb, tape.param(params_, p + ".ts.w"), tape.param(params_, p + ".ts.b"));
        ad::V b = tape.linear(emb, tape.param(params_, p + ".tb.w"), tape.param(params_, p + ".tb.b"));
        return tape.scale_shift(h, s, b);
    };

    ad::V h = tape.conv2d(x, tape.param(params_, "in.w"), tape.param(params_, "in.b"));
    h = inject(h, "in");
    if (training && dropout_rng) h = tape.dropout(h, cfg_.dropout, *dropout_rng, true);

    for (int b = 0; b < cfg_.blocks; ++b) {
        const std::string p = "blk" + std::to_string(b);
        ad::V hb = h;
        if (b == 0 || b == cfg_.blocks - 1) hb = inject(hb, p);
        hb = tape.conv2d(hb, tape.param(params_, p + ".c1.w"), tape.param(params_, p + ".c1.b"));
        hb = tape.simple_gate(hb);
        hb = tape.conv2d(hb, tape.param(params_, p + ".c2.w"), tape.param(params_, p + ".c2.b"));
        h = tape.add(h, hb);
    }

    if (training && dropout_rng) h = tape.dropout(h, cfg_.dropout, *dropout_rng, true);
    return tape.conv2d(h, tape.param(params_, "out.w"), tape.param(params_, "out.b"));
}

Tensor CondDenoiser::predict_eps(const Tensor& x_t, const Tensor& mu, int t) {
    ad::Tape tape;
    ad::V out = forward(tape, x_t, mu, t, false, nullptr);
    Tensor eps({x_t.dim(0), x_t.dim(1)});
    eps.data = out.value().data;
    return eps;
}

Tensor CondDenoiser::evaluate(const Tensor& x_t, const Tensor& mu, int t) {
    const Marginal m = forward_marginal(*sched_, t);
    if (m.var <= 0.0) throw std::invalid_argument("denoiser score: v_t == 0");
    Tensor eps = predict_eps(x_t, mu, t);
    const float s = static_cast<float>(-1.0 / std::sqrt(m.var));
    for (auto& v : eps.data) v *= s;
    return eps;
}

std::vector<double> train_score(const std::vector<PairedSample>& dataset,
                                const DiffusionSchedule& sched, CondDenoiser& model,
                                const TrainScoreConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train_score: empty dataset");
    if (sched.lambda2 <= 0.0) throw std::invalid_argument("train_score: lambda2 must be > 0");
    Rng rng(cfg.seed);
    AdamW opt({.lr = cfg.lr,
               .weight_decay = cfg.weight_decay,
               .total_steps = cfg.steps});
    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        model.params().zero_grad();
        double loss_acc = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const PairedSample& s = dataset[rng.below(dataset.size())];
            const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.T)));
            const Marginal m = forward_marginal(sched, t);
            const double sd = std::sqrt(m.var);
            Tensor x_t(s.x0.shape);
            Tensor eps(s.x0.shape);
            for (std::size_t i = 0; i < x_t.size(); ++i) {
                const double e = rng.normal();
                eps[i] = static_cast<float>(e);
                x_t[i] = static_cast<float>(s.mu[i] + (s.x0[i] - s.mu[i]) * m.mean_coef + sd * e);
            }
            ad::Tape tape;
            ad::V pred = model.forward(tape, x_t, s.mu, t, true, &rng);
            ad::V target = tape.leaf(Tensor{{1, x_t.dim(0), x_t.dim(1)}});
            tape.node(target.idx).value.data = eps.data;
            ad::V loss = tape.l2_loss(pred, target);
            tape.backward(loss);
            loss_acc += loss.value()[0];
        }
        // average the batch gradient
        for (auto& [_, e] : model.params().entries())
            for (auto& g : e.grad.data) g /= static_cast<float>(cfg.batch);
        opt.step(model.params());
        curve.push_back(loss_acc / cfg.batch);
    }
    return curve;
}

}  // namespace rnsde
