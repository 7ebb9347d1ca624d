#include "rnsde/restorer.hpp"

#include <cmath>
#include <stdexcept>

#include "rnsde/optim.hpp"

namespace rnsde {

namespace {

Tensor conv_init(int K, int C, int kh, int kw, Rng& rng) {
    const double std = std::sqrt(2.0 / (static_cast<double>(C) * kh * kw));
    Tensor t({K, C, kh, kw});
    for (auto& v : t.data) v = static_cast<float>(std * rng.normal());
    return t;
}

}  // namespace

Restorer::Restorer(RestorerConfig cfg, Rng& init_rng) : cfg_(cfg) {
    const int C = cfg_.width;
    params_.add("in.w", conv_init(C, 1, 3, 3, init_rng));
    params_.add("in.b", Tensor({C}));
    for (int b = 0; b < cfg_.blocks; ++b) {
        const std::string p = "blk" + std::to_string(b);
        params_.add(p + ".c1.w", conv_init(2 * C, C, 3, 3, init_rng));
        params_.add(p + ".c1.b", Tensor({2 * C}));
        params_.add(p + ".c2.w", conv_init(C, C, 3, 3, init_rng));
        params_.add(p + ".c2.b", Tensor({C}));
    }
    params_.add("out.w", Tensor({1, C, 3, 3}));  // zero: start as the identity map
    params_.add("out.b", Tensor({1}));
}

ad::V Restorer::forward(ad::Tape& tape, const Tensor& fbp_img, bool training, Rng* dropout_rng) {
    if (fbp_img.ndim() != 2) throw std::invalid_argument("restorer: expects 2-D images");
    const int H = fbp_img.dim(0), W = fbp_img.dim(1);

    Tensor in({1, H, W});
    in.data = fbp_img.data;
    ad::V x = tape.leaf(in);

    ad::V h = tape.conv2d(x, tape.param(params_, "in.w"), tape.param(params_, "in.b"));
    if (training && dropout_rng) h = tape.dropout(h, cfg_.dropout, *dropout_rng, true);
    for (int b = 0; b < cfg_.blocks; ++b) {
        const std::string p = "blk" + std::to_string(b);
        ad::V hb = tape.conv2d(h, tape.param(params_, p + ".c1.w"), tape.param(params_, p + ".c1.b"));
        hb = tape.simple_gate(hb);
        hb = tape.conv2d(hb, tape.param(params_, p + ".c2.w"), tape.param(params_, p + ".c2.b"));
        h = tape.add(h, hb);
    }
    ad::V res = tape.conv2d(h, tape.param(params_, "out.w"), tape.param(params_, "out.b"));
    return tape.add(x, res);  // residual output
}

Tensor Restorer::restore(const Tensor& fbp_img) const {
    ad::Tape tape;
    auto& self = *const_cast<Restorer*>(this);
    ad::V out = self.forward(tape, fbp_img, false, nullptr);
    Tensor img({fbp_img.dim(0), fbp_img.dim(1)});
    img.data = out.value().data;
    if (!img.all_finite()) throw std::runtime_error("restorer: non-finite output");
    return img;
}

namespace {

double eval_l2(Restorer& model, const std::vector<RestorerPair>& set) {
    double acc = 0.0;
    for (const auto& p : set) {
        Tensor rec = model.restore(p.fbp);
        double mse = 0.0;
        for (std::size_t i = 0; i < rec.size(); ++i) {
            const double d = static_cast<double>(rec[i]) - p.gt[i];
            mse += d * d;
        }
        acc += mse / static_cast<double>(rec.size());
    }
    return acc / static_cast<double>(set.size());
}

}  // namespace

std::vector<double> train_restorer(const std::vector<RestorerPair>& train_set,
                                   const std::vector<RestorerPair>& val_set, Restorer& model,
                                   const TrainRestorerConfig& cfg) {
    if (train_set.empty()) throw std::invalid_argument("train_restorer: empty train set");
    const std::vector<RestorerPair>& val = val_set.empty() ? train_set : val_set;

    Rng rng(cfg.seed);
    AdamW opt({.lr = cfg.lr, .weight_decay = cfg.weight_decay, .total_steps = cfg.steps});

    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(cfg.steps));
    double best_val = eval_l2(model, val);
    std::map<std::string, Tensor> best_params;
    for (const auto& [name, e] : model.params().entries()) best_params[name] = e.value;

    for (int step = 0; step < cfg.steps; ++step) {
        model.params().zero_grad();
        double loss_acc = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const RestorerPair& p = train_set[rng.below(train_set.size())];
            ad::Tape tape;
            ad::V pred = model.forward(tape, p.fbp, true, &rng);
            Tensor tgt({1, p.gt.dim(0), p.gt.dim(1)});
            tgt.data = p.gt.data;
            ad::V loss = tape.l2_loss(pred, tape.leaf(tgt));
            tape.backward(loss);
            loss_acc += loss.value()[0];
        }
        if (!std::isfinite(loss_acc)) throw std::runtime_error("train_restorer: NaN loss");
        for (auto& [_, e] : model.params().entries())
            for (auto& g : e.grad.data) g /= static_cast<float>(cfg.batch);
        opt.step(model.params());
        curve.push_back(loss_acc / cfg.batch);

        if ((step + 1) % cfg.val_interval == 0 || step + 1 == cfg.steps) {
            const double v = eval_l2(model, val);
            if (v < best_val) {
                best_val = v;
                for (const auto& [name, e] : model.params().entries()) best_params[name] = e.value;
            }
        }
    }
    for (auto& [name, e] : model.params().entries()) e.value = best_params.at(name);
    return curve;
}

}  // namespace rnsde
