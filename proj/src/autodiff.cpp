#include "rnsde/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "rnsde/kernels.hpp"

namespace rnsde::ad {

const Tensor& V::value() const { return tape->node(idx).value; }
const Tensor& V::grad() const { return tape->node(idx).grad; }

V Tape::push(Tensor value, bool needs_grad, const char* op) {
    auto n = std::make_unique<Node>();
    n->value = std::move(value);
    n->needs_grad = needs_grad;
    n->op = op;
    nodes_.push_back(std::move(n));
    return V{this, static_cast<int>(nodes_.size()) - 1};
}

V Tape::leaf(Tensor t, bool needs_grad) { return push(std::move(t), needs_grad, "leaf"); }

V Tape::param(ParamStore& store, const std::string& name) {
    auto& e = store.entry(name);
    V v = push(e.value, true, "param");
    node(v.idx).bound = &e;
    return v;
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}
Tensor& grad_of(Tape& t, V v) { return t.node(v.idx).grad; }
}  // namespace

V Tape::add(V a, V b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out(a.value().shape);
    kern::add(a.value().data.data(), b.value().data.data(), out.data.data(), out.size());
    V y = push(std::move(out), node(a.idx).needs_grad || node(b.idx).needs_grad, "add");
    node(y.idx).backward_fn = [this, a, b, y] {
        const Tensor& g = node(y.idx).grad;
        if (node(a.idx).needs_grad) kern::axpy(1.0f, g.data.data(), grad_of(*this, a).data.data(), g.size());
        if (node(b.idx).needs_grad) kern::axpy(1.0f, g.data.data(), grad_of(*this, b).data.data(), g.size());
    };
    return y;
}

V Tape::sub(V a, V b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out(a.value().shape);
    kern::sub(a.value().data.data(), b.value().data.data(), out.data.data(), out.size());
    V y = push(std::move(out), node(a.idx).needs_grad || node(b.idx).needs_grad, "sub");
    node(y.idx).backward_fn = [this, a, b, y] {
        const Tensor& g = node(y.idx).grad;
        if (node(a.idx).needs_grad) kern::axpy(1.0f, g.data.data(), grad_of(*this, a).data.data(), g.size());
        if (node(b.idx).needs_grad) kern::axpy(-1.0f, g.data.data(), grad_of(*this, b).data.data(), g.size());
    };
    return y;
}

V Tape::mul(V a, V b) {
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out(a.value().shape);
    kern::mul(a.value().data.data(), b.value().data.data(), out.data.data(), out.size());
    V y = push(std::move(out), node(a.idx).needs_grad || node(b.idx).needs_grad, "mul");
    node(y.idx).backward_fn = [this, a, b, y] {
        const Tensor& g = node(y.idx).grad;
        const std::size_t n = g.size();
        if (node(a.idx).needs_grad) {
            Tensor tmp(g.shape);
            kern::mul(g.data.data(), node(b.idx).value.data.data(), tmp.data.data(), n);
            kern::axpy(1.0f, tmp.data.data(), grad_of(*this, a).data.data(), n);
        }
        if (node(b.idx).needs_grad) {
            Tensor tmp(g.shape);
            kern::mul(g.data.data(), node(a.idx).value.data.data(), tmp.data.data(), n);
            kern::axpy(1.0f, tmp.data.data(), grad_of(*this, b).data.data(), n);
        }
    };
    return y;
}

V Tape::scale(V a, float c) {
    Tensor out(a.value().shape);
    kern::scale(c, 0.0f, a.value().data.data(), out.data.data(), out.size());
    V y = push(std::move(out), node(a.idx).needs_grad, "scale");
    node(y.idx).backward_fn = [this, a, y, c] {
        if (node(a.idx).needs_grad)
            kern::axpy(c, node(y.idx).grad.data.data(), grad_of(*this, a).data.data(),
                       node(y.idx).grad.size());
    };
    return y;
}

V Tape::add_const(V a, float c) {
    Tensor out(a.value().shape);
    kern::scale(1.0f, c, a.value().data.data(), out.data.data(), out.size());
    V y = push(std::move(out), node(a.idx).needs_grad, "add_const");
    node(y.idx).backward_fn = [this, a, y] {
        if (node(a.idx).needs_grad)
            kern::axpy(1.0f, node(y.idx).grad.data.data(), grad_of(*this, a).data.data(),
                       node(y.idx).grad.size());
    };
    return y;
}

V Tape::conv2d(V x, V w, V bias, int dilation) {
    const Tensor& xin = x.value();
    const Tensor& wt = w.value();
    if (xin.ndim() != 3 || wt.ndim() != 4) throw std::invalid_argument("conv2d: rank");
    const int C = xin.dim(0), H = xin.dim(1), W = xin.dim(2);
    const int K = wt.dim(0), kh = wt.dim(2), kw = wt.dim(3);
    if (wt.dim(1) != C) throw std::invalid_argument("conv2d: channel mismatch");
    if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d: taps must be odd");
    if (dilation < 1) throw std::invalid_argument("conv2d: dilation must be >= 1");
    const int ph = kh / 2, pw = kw / 2, dil = dilation;

    Tensor out({K, H, W});
    // shift-accumulate: out[k,r,c] += w[k,ci,ty,tx] * x[ci,r+ty-ph,c+tx-pw]
    for (int k = 0; k < K; ++k) {
        float* yk = &out.data[static_cast<std::size_t>(k) * H * W];
        for (int ci = 0; ci < C; ++ci) {
            const float* xc = &xin.data[static_cast<std::size_t>(ci) * H * W];
            for (int ty = 0; ty < kh; ++ty) {
                const int dy = (ty - ph) * dil;
                for (int tx = 0; tx < kw; ++tx) {
                    const int dx = (tx - pw) * dil;
                    const float wv =
                        wt.data[((static_cast<std::size_t>(k) * C + ci) * kh + ty) * kw + tx];
                    if (wv == 0.0f) continue;
                    const int r0 = std::max(0, -dy), r1 = std::min(H, H - dy);
                    const int c0 = std::max(0, -dx), c1 = std::min(W, W - dx);
                    for (int r = r0; r < r1; ++r)
                        kern::axpy(wv, xc + (r + dy) * W + (c0 + dx), yk + r * W + c0,
                                   static_cast<std::size_t>(c1 - c0));
                }
            }
        }
    }
    if (bias.tape) {
        const Tensor& b = bias.value();
        if (b.ndim() != 1 || b.dim(0) != K) throw std::invalid_argument("conv2d: bias shape");
        for (int k = 0; k < K; ++k)
            kern::scale(1.0f, b[static_cast<std::size_t>(k)],
                        &out.data[static_cast<std::size_t>(k) * H * W],
                        &out.data[static_cast<std::size_t>(k) * H * W],
                        static_cast<std::size_t>(H) * W);
    }

    bool ng = node(x.idx).needs_grad || node(w.idx).needs_grad ||
              (bias.tape && node(bias.idx).needs_grad);
    V y = push(std::move(out), ng, "conv2d");
    node(y.idx).backward_fn = [this, x, w, bias, y, C, H, W, K, kh, kw, ph, pw, dil] {
        const Tensor& g = node(y.idx).grad;
        const Tensor& xin2 = node(x.idx).value;
        const Tensor& wt2 = node(w.idx).value;
        if (node(x.idx).needs_grad) {
            Tensor& gx = grad_of(*this, x);
            for (int k = 0; k < K; ++k) {
                const float* gk = &g.data[static_cast<std::size_t>(k) * H * W];
                for (int ci = 0; ci < C; ++ci) {
                    float* gxc = &gx.data[static_cast<std::size_t>(ci) * H * W];
                    for (int ty = 0; ty < kh; ++ty) {
                        const int dy = (ty - ph) * dil;
                        for (int tx = 0; tx < kw; ++tx) {
                            const int dx = (tx - pw) * dil;
                            const float wv =
                                wt2.data[((static_cast<std::size_t>(k) * C + ci) * kh + ty) * kw + tx];
                            if (wv == 0.0f) continue;
                            const int r0 = std::max(0, -dy), r1 = std::min(H, H - dy);
                            const int c0 = std::max(0, -dx), c1 = std::min(W, W - dx);
                            for (int r = r0; r < r1; ++r)
                                kern::axpy(wv, gk + r * W + c0, gxc + (r + dy) * W + (c0 + dx),
                                           static_cast<std::size_t>(c1 - c0));
                        }
                    }
                }
            }
        }
        if (node(w.idx).needs_grad) {
            Tensor& gw = grad_of(*this, w);
            for (int k = 0; k < K; ++k) {
                const float* gk = &g.data[static_cast<std::size_t>(k) * H * W];
                for (int ci = 0; ci < C; ++ci) {
                    const float* xc = &xin2.data[static_cast<std::size_t>(ci) * H * W];
                    for (int ty = 0; ty < kh; ++ty) {
                        const int dy = (ty - ph) * dil;
                        for (int tx = 0; tx < kw; ++tx) {
                            const int dx = (tx - pw) * dil;
                            const int r0 = std::max(0, -dy), r1 = std::min(H, H - dy);
                            const int c0 = std::max(0, -dx), c1 = std::min(W, W - dx);
                            double acc = 0.0;
                            for (int r = r0; r < r1; ++r)
                                acc += kern::dot(gk + r * W + c0, xc + (r + dy) * W + (c0 + dx),
                                                 static_cast<std::size_t>(c1 - c0));
                            gw.data[((static_cast<std::size_t>(k) * C + ci) * kh + ty) * kw + tx] +=
                                static_cast<float>(acc);
                        }
                    }
                }
            }
        }
        if (bias.tape && node(bias.idx).needs_grad) {
            Tensor& gb = grad_of(*this, bias);
            for (int k = 0; k < K; ++k)
                gb[static_cast<std::size_t>(k)] += static_cast<float>(
                    kern::sum(&g.data[static_cast<std::size_t>(k) * H * W],
                              static_cast<std::size_t>(H) * W));
        }
    };
    return y;
}

V Tape::linear(V x, V w, V bias) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.ndim() != 1 || wv.ndim() != 2 || wv.dim(1) != xv.dim(0))
        throw std::invalid_argument("linear: shape mismatch");
    const int m = wv.dim(0), n = wv.dim(1);
    Tensor out({m});
    for (int i = 0; i < m; ++i)
        out[static_cast<std::size_t>(i)] = static_cast<float>(
            kern::dot(&wv.data[static_cast<std::size_t>(i) * n], xv.data.data(),
                      static_cast<std::size_t>(n)));
    if (bias.tape) {
        require_same_shape(out, bias.value(), "linear bias");
        kern::add(out.data.data(), bias.value().data.data(), out.data.data(), out.size());
    }
    bool ng = node(x.idx).needs_grad || node(w.idx).needs_grad ||
              (bias.tape && node(bias.idx).needs_grad);
    V y = push(std::move(out), ng, "linear");
    node(y.idx).backward_fn = [this, x, w, bias, y, m, n] {
        const Tensor& g = node(y.idx).grad;
        const Tensor& xv2 = node(x.idx).value;
        const Tensor& wv2 = node(w.idx).value;
        if (node(x.idx).needs_grad) {
            Tensor& gx = grad_of(*this, x);
            for (int i = 0; i < m; ++i)
                kern::axpy(g[static_cast<std::size_t>(i)],
                           &wv2.data[static_cast<std::size_t>(i) * n], gx.data.data(),
                           static_cast<std::size_t>(n));
        }
        if (node(w.idx).needs_grad) {
            Tensor& gw = grad_of(*this, w);
            for (int i = 0; i < m; ++i)
                kern::axpy(g[static_cast<std::size_t>(i)], xv2.data.data(),
                           &gw.data[static_cast<std::size_t>(i) * n], static_cast<std::size_t>(n));
        }
        if (bias.tape && node(bias.idx).needs_grad)
            kern::axpy(1.0f, g.data.data(), grad_of(*this, bias).data.data(), g.size());
    };
    return y;
}

V Tape::scale_shift(V x, V s, V b) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3) throw std::invalid_argument("scale_shift: expects [C,H,W]");
    const int C = xv.dim(0);
    const std::size_t hw = static_cast<std::size_t>(xv.dim(1)) * xv.dim(2);
    if (s.value().ndim() != 1 || s.value().dim(0) != C || b.value().ndim() != 1 ||
        b.value().dim(0) != C)
        throw std::invalid_argument("scale_shift: modulation shape");
    Tensor out(xv.shape);
    for (int c = 0; c < C; ++c)
        kern::scale(1.0f + s.value()[static_cast<std::size_t>(c)],
                    b.value()[static_cast<std::size_t>(c)], &xv.data[c * hw], &out.data[c * hw], hw);
    bool ng = node(x.idx).needs_grad || node(s.idx).needs_grad || node(b.idx).needs_grad;
    V y = push(std::move(out), ng, "scale_shift");
    node(y.idx).backward_fn = [this, x, s, b, y, C, hw] {
        const Tensor& g = node(y.idx).grad;
        const Tensor& xv2 = node(x.idx).value;
        const Tensor& sv = node(s.idx).value;
        for (int c = 0; c < C; ++c) {
            if (node(x.idx).needs_grad)
                kern::axpy(1.0f + sv[static_cast<std::size_t>(c)], &g.data[c * hw],
                           &grad_of(*this, x).data[c * hw], hw);
            if (node(s.idx).needs_grad)
                grad_of(*this, s)[static_cast<std::size_t>(c)] += static_cast<float>(
                    kern::dot(&g.data[c * hw], &xv2.data[c * hw], hw));
            if (node(b.idx).needs_grad)
                grad_of(*this, b)[static_cast<std::size_t>(c)] +=
                    static_cast<float>(kern::sum(&g.data[c * hw], hw));
        }
    };
    return y;
}

V Tape::simple_gate(V x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3 || xv.dim(0) % 2 != 0)
        throw std::invalid_argument("simple_gate: needs even channel count");
    const int C = xv.dim(0) / 2;
    const std::size_t hw = static_cast<std::size_t>(xv.dim(1)) * xv.dim(2);
    Tensor out({C, xv.dim(1), xv.dim(2)});
    const std::size_t half = static_cast<std::size_t>(C) * hw;
    kern::mul(xv.data.data(), xv.data.data() + half, out.data.data(), half);
    V y = push(std::move(out), node(x.idx).needs_grad, "simple_gate");
    node(y.idx).backward_fn = [this, x, y, half] {
        if (!node(x.idx).needs_grad) return;
        const Tensor& g = node(y.idx).grad;
        const Tensor& xv2 = node(x.idx).value;
        Tensor tmp(g.shape);
        Tensor& gx = grad_of(*this, x);
        kern::mul(g.data.data(), xv2.data.data() + half, tmp.data.data(), half);
        kern::axpy(1.0f, tmp.data.data(), gx.data.data(), half);
        kern::mul(g.data.data(), xv2.data.data(), tmp.data.data(), half);
        kern::axpy(1.0f, tmp.data.data(), gx.data.data() + half, half);
    };
    return y;
}

V Tape::concat_ch(V a, V b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.ndim() != 3 || bv.ndim() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
        throw std::invalid_argument("concat_ch: spatial mismatch");
    Tensor out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
    std::memcpy(out.data.data(), av.data.data(), av.size() * sizeof(float));
    std::memcpy(out.data.data() + av.size(), bv.data.data(), bv.size() * sizeof(float));
    V y = push(std::move(out), node(a.idx).needs_grad || node(b.idx).needs_grad, "concat_ch");
    node(y.idx).backward_fn = [this, a, b, y] {
        const Tensor& g = node(y.idx).grad;
        const std::size_t na = node(a.idx).value.size();
        if (node(a.idx).needs_grad)
            kern::axpy(1.0f, g.data.data(), grad_of(*this, a).data.data(), na);
        if (node(b.idx).needs_grad)
            kern::axpy(1.0f, g.data.data() + na, grad_of(*this, b).data.data(),
                       node(b.idx).value.size());
    };
    return y;
}

V Tape::dropout(V x, float p, Rng& rng, bool training) {
    if (!training || p <= 0.0f) return x;
    const Tensor& xv = x.value();
    auto mask = std::make_shared<std::vector<float>>(xv.size());
    const float keep_scale = 1.0f / (1.0f - p);
    Tensor out(xv.shape);
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const float m = rng.uniform() < p ? 0.0f : keep_scale;
        (*mask)[i] = m;
        out[i] = xv[i] * m;
    }
    V y = push(std::move(out), node(x.idx).needs_grad, "dropout");
    node(y.idx).backward_fn = [this, x, y, mask] {
        if (!node(x.idx).needs_grad) return;
        const Tensor& g = node(y.idx).grad;
        Tensor& gx = grad_of(*this, x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
    };
    return y;
}

V Tape::mean_all(V x) {
    const Tensor& xv = x.value();
    if (xv.size() == 0) throw std::invalid_argument("mean_all: empty");
    Tensor out({1});
    out[0] = static_cast<float>(kern::sum(xv.data.data(), xv.size()) /
                                static_cast<double>(xv.size()));
    V y = push(std::move(out), node(x.idx).needs_grad, "mean_all");
    node(y.idx).backward_fn = [this, x, y] {
        if (!node(x.idx).needs_grad) return;
        const float g = node(y.idx).grad[0] / static_cast<float>(node(x.idx).value.size());
        Tensor& gx = grad_of(*this, x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    };
    return y;
}

V Tape::l1_loss(V a, V b) {
    require_same_shape(a.value(), b.value(), "l1_loss");
    const std::size_t n = a.value().size();
    Tensor diff(a.value().shape);
    kern::sub(a.value().data.data(), b.value().data.data(), diff.data.data(), n);
    Tensor out({1});
    out[0] = static_cast<float>(kern::sumabs(diff.data.data(), n) / static_cast<double>(n));
    V y = push(std::move(out), node(a.idx).needs_grad || node(b.idx).needs_grad, "l1_loss");
    auto d = std::make_shared<Tensor>(std::move(diff));
    node(y.idx).backward_fn = [this, a, b, y, d, n] {
        const float g = node(y.idx).grad[0] / static_cast<float>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const float s = (*d)[i] > 0.0f ? g : ((*d)[i] < 0.0f ? -g : 0.0f);
            if (node(a.idx).needs_grad) grad_of(*this, a)[i] += s;
            if (node(b.idx).needs_grad) grad_of(*this, b)[i] -= s;
        }
    };
    return y;
}

V Tape::l2_loss(V a, V b) {
    require_same_shape(a.value(), b.value(), "l2_loss");
    const std::size_t n = a.value().size();
    Tensor diff(a.value().shape);
    kern::sub(a.value().data.data(), b.value().data.data(), diff.data.data(), n);
    Tensor out({1});
    out[0] = static_cast<float>(kern::sumsq(diff.data.data(), n) / static_cast<double>(n));
    V y = push(std::move(out), node(a.idx).needs_grad || node(b.idx).needs_grad, "l2_loss");
    auto d = std::make_shared<Tensor>(std::move(diff));
    node(y.idx).backward_fn = [this, a, b, y, d, n] {
        const float g = 2.0f * node(y.idx).grad[0] / static_cast<float>(n);
        if (node(a.idx).needs_grad)
            kern::axpy(g, d->data.data(), grad_of(*this, a).data.data(), n);
        if (node(b.idx).needs_grad)
            kern::axpy(-g, d->data.data(), grad_of(*this, b).data.data(), n);
    };
    return y;
}

V Tape::linear_op(V x, std::vector<int> out_shape,
                  std::function<void(const Tensor&, Tensor&)> fwd,
                  std::function<void(const Tensor&, Tensor&)> adj, const char* name) {
    Tensor out(out_shape);
    fwd(x.value(), out);
    V y = push(std::move(out), node(x.idx).needs_grad, name);
    node(y.idx).backward_fn = [this, x, y, adj] {
        if (!node(x.idx).needs_grad) return;
        Tensor gx(node(x.idx).value.shape);
        adj(node(y.idx).grad, gx);
        kern::axpy(1.0f, gx.data.data(), grad_of(*this, x).data.data(), gx.size());
    };
    return y;
}

V Tape::raw(Tensor value, bool needs_grad, const char* op) {
    return push(std::move(value), needs_grad, op);
}

void Tape::backward(V loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss from another tape");
    Node& ln = node(loss.idx);
    if (ln.value.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    for (auto& n : nodes_)
        if (n->needs_grad) n->grad = Tensor(n->value.shape);
    ln.grad[0] = 1.0f;
    for (int i = loss.idx; i >= 0; --i) {
        Node& n = node(i);
        if (n.needs_grad && n.backward_fn) n.backward_fn();
    }
    for (auto& n : nodes_)
        if (n->bound)
            kern::axpy(1.0f, n->grad.data.data(), n->bound->grad.data.data(), n->grad.size());
}

}  // namespace rnsde::ad
