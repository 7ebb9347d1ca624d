#include "rnsde/pinv.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rnsde/fft.hpp"
#include "rnsde/kernels.hpp"
#include "rnsde/optim.hpp"

namespace rnsde {

namespace {

Tensor conv_init(int K, int C, int kh, int kw, double gain, Rng& rng) {
    const double std = gain * std::sqrt(2.0 / (static_cast<double>(C) * kh * kw));
    Tensor t({K, C, kh, kw});
    for (auto& v : t.data) v = static_cast<float>(std * rng.normal());
    return t;
}

}  // namespace

LearnablePinv::LearnablePinv(Geometry geom, int image_size, PinvConfig cfg, Rng& init_rng)
    : geom_(std::move(geom)), size_(image_size), cfg_(cfg) {
    npad_ = next_pow2(2 * geom_.num_detectors);
    nfreq_ = npad_ / 2 + 1;
    std::vector<double> h(static_cast<std::size_t>(npad_), 0.0);
    for (int k = 0; k < npad_; ++k)
        h[static_cast<std::size_t>(k)] = ramlak_kernel(k <= npad_ / 2 ? k : k - npad_);
    auto Hf = fft_real(h);
    base_gain_.resize(static_cast<std::size_t>(npad_));
    for (int k = 0; k < npad_; ++k) base_gain_[static_cast<std::size_t>(k)] = Hf[static_cast<std::size_t>(k)].real();

    // per-angle log-gains, zero == Ram-Lak; angle resolution lets the filter
    // correct the uneven response near the edges of the observed wedge
    params_.add("filter.g", Tensor({geom_.num_angles(), nfreq_}));
    const int C = cfg_.postproc_width;
    params_.add("pp.in.w", conv_init(C, 1, 3, 3, 1.0, init_rng));
    for (int b = 0; b < cfg_.postproc_blocks; ++b) {
        const std::string p = "pp.blk" + std::to_string(b);
        params_.add(p + ".c1.w", conv_init(2 * C, C, 3, 3, 1.0, init_rng));
        // damped: the gate multiply squares activation scale per block
        params_.add(p + ".c2.w", conv_init(C, C, 3, 3, 0.25, init_rng));
    }
    params_.add("pp.out.w", Tensor({1, C, 3, 3}));  // zero -> identity at init
}

namespace {

// y_row = ifft(gain .* fft(pad(x_row)))[0:D], gain real and symmetric.
struct RowFilter {
    int A, D, npad;
    std::vector<double> gain;  // [A, npad], row-major

    void forward(const Tensor& sino, Tensor& out) const {
        std::vector<std::complex<double>> row(static_cast<std::size_t>(npad));
        for (int a = 0; a < A; ++a) {
            const double* ga = &gain[static_cast<std::size_t>(a) * npad];
            for (int k = 0; k < npad; ++k)
                row[static_cast<std::size_t>(k)] =
                    k < D ? std::complex<double>(sino.at(a, k), 0.0) : 0.0;
            auto spec = fft_1d(row);
            for (int k = 0; k < npad; ++k) spec[static_cast<std::size_t>(k)] *= ga[static_cast<std::size_t>(k)];
            auto filt = ifft_1d(spec);
            for (int d = 0; d < D; ++d) out.at(a, d) = static_cast<float>(filt[static_cast<std::size_t>(d)].real());
        }
    }

    // accumulates Re[conj(F gout_row) .* (F x_row)] / npad per (angle, frequency)
    void gain_grad(const Tensor& x, const Tensor& gout, std::vector<double>& ggain) const {
        std::vector<std::complex<double>> rx(static_cast<std::size_t>(npad)), rg(static_cast<std::size_t>(npad));
        for (int a = 0; a < A; ++a) {
            for (int k = 0; k < npad; ++k) {
                rx[static_cast<std::size_t>(k)] = k < D ? std::complex<double>(x.at(a, k), 0.0) : 0.0;
                rg[static_cast<std::size_t>(k)] = k < D ? std::complex<double>(gout.at(a, k), 0.0) : 0.0;
            }
            auto fx = fft_1d(rx);
            auto fg = fft_1d(rg);
            for (int k = 0; k < npad; ++k)
                ggain[static_cast<std::size_t>(a) * npad + static_cast<std::size_t>(k)] +=
                    (std::conj(fg[static_cast<std::size_t>(k)]) * fx[static_cast<std::size_t>(k)]).real() / npad;
        }
    }
};

}  // namespace

ad::V LearnablePinv::apply_tape(ad::Tape& tape, ad::V sino_node) const {
    const int A = geom_.num_angles();
    const int D = geom_.num_detectors;
    const Tensor& sv = sino_node.value();
    if (sv.ndim() != 2 || sv.dim(0) != A || sv.dim(1) != D)
        throw std::invalid_argument("pinv: sinogram/geometry mismatch");

    // filter rows with gain = base .* exp(g)
    auto& self = *const_cast<LearnablePinv*>(this);
    ad::V gnode = tape.param(self.params_, "filter.g");
    RowFilter rf{A, D, npad_, {}};
    rf.gain.resize(static_cast<std::size_t>(A) * npad_);
    for (int a = 0; a < A; ++a)
        for (int k = 0; k < npad_; ++k) {
            const int f = k <= npad_ / 2 ? k : npad_ - k;
            rf.gain[static_cast<std::size_t>(a) * npad_ + static_cast<std::size_t>(k)] =
                base_gain_[static_cast<std::size_t>(k)] *
                std::exp(gnode.value().at(a, f));
        }
    Tensor filtered({A, D});
    rf.forward(sv, filtered);
    ad::V filt = tape.raw(std::move(filtered), true, "row_filter");
    tape.node(filt.idx).backward_fn = [&tape, sino_node, gnode, filt, rf, A, npad = npad_] {
        const Tensor& g = tape.node(filt.idx).grad;
        if (tape.node(sino_node.idx).needs_grad) {
            Tensor gx(tape.node(sino_node.idx).value.shape);
            rf.forward(g, gx);  // real symmetric gain per row: self-adjoint
            kern::axpy(1.0f, gx.data.data(), tape.node(sino_node.idx).grad.data.data(), gx.size());
        }
        std::vector<double> ggain(static_cast<std::size_t>(A) * npad, 0.0);
        rf.gain_grad(tape.node(sino_node.idx).value, g, ggain);
        Tensor& gg = tape.node(gnode.idx).grad;
        for (int a = 0; a < A; ++a)
            for (int k = 0; k < npad; ++k) {
                const int f = k <= npad / 2 ? k : npad - k;
                const std::size_t i = static_cast<std::size_t>(a) * npad + static_cast<std::size_t>(k);
                gg.at(a, f) += static_cast<float>(ggain[i] * rf.gain[i]);
            }
    };

    // back-project, scale by pi/A, mask to inscribed circle
    const int n = size_;
    const Geometry geom = geom_;
    const float scale = static_cast<float>(std::numbers::pi / A);
    auto fwd = [geom, n, scale](const Tensor& s, Tensor& out) {
        Tensor img = backproject(Sinogram{geom, s}, n, n);
        const double cx = (n - 1) / 2.0, rad = n / 2.0;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                out.at(0, y, x) =
                    std::hypot(x - cx, y - cx) <= rad ? img.at(y, x) * scale : 0.0f;
    };
    auto adj = [geom, n, scale](const Tensor& gimg, Tensor& gs) {
        Tensor masked({n, n});
        const double cx = (n - 1) / 2.0, rad = n / 2.0;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                masked.at(y, x) =
                    std::hypot(x - cx, y - cx) <= rad ? gimg.at(0, y, x) * scale : 0.0f;
        gs = radon(masked, geom).values;
    };
    ad::V bp = tape.linear_op(filt, {1, n, n}, fwd, adj, "learned_bp");

    // bias-free residual post-processor; dilations grow per block so the
    // receptive field spans the long-range streaks of limited-angle FBP
    ad::V h = tape.conv2d(bp, tape.param(self.params_, "pp.in.w"));
    for (int b = 0; b < cfg_.postproc_blocks; ++b) {
        const std::string p = "pp.blk" + std::to_string(b);
        const int dil = 1 << std::min(b, 3);
        ad::V hb = tape.conv2d(h, tape.param(self.params_, p + ".c1.w"), {}, dil);
        hb = tape.simple_gate(hb);
        hb = tape.conv2d(hb, tape.param(self.params_, p + ".c2.w"), {}, dil);
        h = tape.add(h, hb);
    }
    ad::V corr = tape.conv2d(h, tape.param(self.params_, "pp.out.w"));
    return tape.add(bp, corr);
}

Tensor LearnablePinv::apply(const Sinogram& sino) const {
    if (!(sino.geom == geom_)) throw std::invalid_argument("pinv: geometry mismatch");
    ad::Tape tape;
    ad::V s = tape.leaf(sino.values);
    ad::V out = apply_tape(tape, s);
    Tensor img({size_, size_});
    img.data = out.value().data;
    return img;
}

PinvLossResult pinv_loss(const std::vector<Tensor>& batch_x0, LearnablePinv& model,
                         const PinvLossConfig& cfg) {
    if (batch_x0.empty()) throw std::invalid_argument("pinv_loss: empty batch");
    if (cfg.alpha_pinv < 0.0 || cfg.alpha_pinv > 1.0)
        throw std::invalid_argument("pinv_loss: alpha must be in [0,1]");
    const Geometry& geom = model.geometry();
    const int n = model.image_size();
    const int A = geom.num_angles(), D = geom.num_detectors;

    auto radon_fwd = [&geom](const Tensor& img3, Tensor& out) {
        Tensor img({img3.dim(1), img3.dim(2)});
        img.data = img3.data;
        out = radon(img, geom).values;
    };
    auto radon_adj = [&geom, n](const Tensor& gsino, Tensor& gimg) {
        Tensor bp = backproject(Sinogram{geom, gsino}, n, n);
        gimg = Tensor({1, n, n});
        gimg.data = bp.data;
    };

    PinvLossResult res;
    for (const Tensor& x0 : batch_x0) {
        Sinogram y = radon(x0, geom);
        ad::Tape tape;
        ad::V ynode = tape.leaf(y.values);
        // l1: |Ax - A P A x|
        ad::V rec = model.apply_tape(tape, ynode);
        ad::V resino = tape.linear_op(rec, {A, D}, radon_fwd, radon_adj, "radon");
        ad::V l1 = tape.l1_loss(resino, ynode);
        ad::V loss = tape.scale(l1, static_cast<float>(1.0 - cfg.alpha_pinv));
        ad::V l2{};
        if (cfg.alpha_pinv > 0.0) {
            // l2: |P y - P A P y| (rec == P y here)
            ad::V r2 = model.apply_tape(tape, resino);
            l2 = tape.l1_loss(rec, r2);
            loss = tape.add(loss, tape.scale(l2, static_cast<float>(cfg.alpha_pinv)));
        }
        tape.backward(loss);
        res.l1 += l1.value()[0];
        if (l2.tape) res.l2 += l2.value()[0];
        res.loss += loss.value()[0];
    }
    const double inv = 1.0 / static_cast<double>(batch_x0.size());
    res.loss *= inv;
    res.l1 *= inv;
    res.l2 *= inv;
    for (auto& [_, e] : model.params().entries())
        for (auto& g : e.grad.data) g = static_cast<float>(g * inv);
    return res;
}

TrainPinvReport train_pinv(const std::vector<Tensor>& dataset, LearnablePinv& model,
                           const TrainPinvConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train_pinv: empty dataset");
    Rng rng(cfg.seed);
    const int total = cfg.phase1_steps + cfg.phase2_steps;
    AdamW opt({.lr = cfg.lr, .total_steps = total});
    TrainPinvReport rep;
    rep.alpha_schedule = {0.0, cfg.phase2_alpha};
    rep.best_l1 = 1e30;
    ParamStore best;
    for (int step = 0; step < total; ++step) {
        PinvLossConfig lcfg;
        lcfg.alpha_pinv = step < cfg.phase1_steps ? 0.0 : cfg.phase2_alpha;
        std::vector<Tensor> batch;
        for (int b = 0; b < cfg.batch; ++b) batch.push_back(dataset[rng.below(dataset.size())]);
        model.params().zero_grad();
        PinvLossResult r = pinv_loss(batch, model, lcfg);
        if (!std::isfinite(r.loss)) throw std::runtime_error("train_pinv: loss diverged (NaN)");
        opt.step(model.params());
        rep.loss_curve.push_back(r.loss);
        rep.l1_curve.push_back(r.l1);
        if (r.l1 < rep.best_l1) {
            rep.best_l1 = r.l1;
            best = model.params();
        }
    }
    model.params() = best;
    return rep;
}

Tensor range_project(const Tensor& x, const LearnablePinv& pinv) {
    return pinv.apply(radon(x, pinv.geometry()));
}

Tensor null_project(const Tensor& x, const LearnablePinv& pinv) {
    Tensor r = range_project(x, pinv);
    Tensor out(x.shape);
    kern::sub(x.data.data(), r.data.data(), out.data.data(), x.size());
    return out;
}

Tensor rectify(const Tensor& x0t, const Sinogram& y, const LearnablePinv& pinv, double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("rectify: gamma must be >= 0");
    if (!(y.geom == pinv.geometry())) throw std::invalid_argument("rectify: geometry mismatch");
    Sinogram res = radon(x0t, pinv.geometry());
    kern::sub(res.values.data.data(), y.values.data.data(), res.values.data.data(),
              res.values.size());
    Tensor corr = pinv.apply(res);
    Tensor out(x0t.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(x0t[i] - gamma * corr[i]);
    return out;
}

Tensor rectify_generic(const Tensor& x0t, const Tensor& y, const LinearFn& fwd,
                       const LinearFn& pinv_fn, double gamma) {
    Tensor res = fwd(x0t);
    if (!res.same_shape(y)) throw std::invalid_argument("rectify_generic: shape mismatch");
    kern::sub(res.data.data(), y.data.data(), res.data.data(), res.size());
    Tensor corr = pinv_fn(res);
    Tensor out(x0t.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(x0t[i] - gamma * corr[i]);
    return out;
}

Tensor MaskingOp::apply(const Tensor& x) const {
    if (x.size() != n) throw std::invalid_argument("masking op: size mismatch");
    Tensor y({static_cast<int>(kept.size())});
    for (std::size_t i = 0; i < kept.size(); ++i) y[i] = x[kept[i]];
    return y;
}

Tensor MaskingOp::pinv(const Tensor& y) const {
    if (y.size() != kept.size()) throw std::invalid_argument("masking op: size mismatch");
    Tensor x({static_cast<int>(n)});
    for (std::size_t i = 0; i < kept.size(); ++i) x[kept[i]] = y[i];
    return x;
}

void LearnablePinv::save(const std::string& path) const {
    std::map<std::string, std::string> meta = {
        {"theta_miss", std::to_string(geom_.theta_miss_deg)},
        {"angle_step", std::to_string(geom_.angle_step_deg)},
        {"num_detectors", std::to_string(geom_.num_detectors)},
        {"image_size", std::to_string(size_)},
        {"postproc_width", std::to_string(cfg_.postproc_width)},
        {"postproc_blocks", std::to_string(cfg_.postproc_blocks)},
    };
    save_params(path, params_, meta);
}

LearnablePinv LearnablePinv::load(const std::string& path) {
    ParamStore tmp;
    std::map<std::string, std::string> meta;
    load_params(path, tmp, &meta);
    Geometry g = make_geometry(std::stoi(meta.at("num_detectors")),
                               std::stod(meta.at("theta_miss")), std::stod(meta.at("angle_step")));
    PinvConfig cfg;
    cfg.postproc_width = std::stoi(meta.at("postproc_width"));
    cfg.postproc_blocks = std::stoi(meta.at("postproc_blocks"));
    Rng dummy(0);
    LearnablePinv p(g, std::stoi(meta.at("image_size")), cfg, dummy);
    p.params_ = ParamStore();
    load_params(path, p.params_);
    return p;
}

}  // namespace rnsde
