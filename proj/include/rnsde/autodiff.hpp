#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rnsde/rng.hpp"
#include "rnsde/tensor.hpp"

namespace rnsde::ad {

class Tape;

// Handle to a node on a tape.
struct V {
    Tape* tape = nullptr;
    int idx = -1;
    const Tensor& value() const;
    const Tensor& grad() const;
};

struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void()> backward_fn;  // pulls this->grad into parents
    ParamStore::Entry* bound = nullptr; // set for parameter leaves
    const char* op = "leaf";
};

// Records a forward pass over a fixed layer vocabulary and replays it in
// reverse. One tape per training step; nodes are append-only.
class Tape {
  public:
    V leaf(Tensor t, bool needs_grad = false);
    V param(ParamStore& store, const std::string& name);

    V add(V a, V b);
    V sub(V a, V b);
    V mul(V a, V b);
    V scale(V a, float c);          // c * a
    V add_const(V a, float c);
    // y[k] = sum_ci sum_taps w[k,ci,·,·] * x[ci,·,·], same padding, odd taps;
    // dilation spaces the taps without adding weights
    V conv2d(V x, V w, V bias = {}, int dilation = 1);
    V linear(V x, V w, V bias = {});             // x[n], w[m,n] -> [m]
    V scale_shift(V x, V s, V b);                // y[c,·] = x[c,·]*(1+s[c]) + b[c]
    V simple_gate(V x);                          // [2C,H,W] -> elementwise product of halves
    V concat_ch(V a, V b);
    V dropout(V x, float p, Rng& rng, bool training);
    V mean_all(V x);                             // -> scalar [1]
    V l1_loss(V a, V b);
    V l2_loss(V a, V b);
    // generic fixed linear operator (e.g. radon / back-projection)
    V linear_op(V x, std::vector<int> out_shape,
                std::function<void(const Tensor&, Tensor&)> fwd,
                std::function<void(const Tensor&, Tensor&)> adj,
                const char* name = "linear_op");

    // Escape hatch for composite ops (e.g. the learnable frequency filter):
    // caller installs backward_fn on the returned node and accumulates into
    // parent node grads directly.
    V raw(Tensor value, bool needs_grad, const char* op);

    // Runs reverse sweep from a scalar loss and accumulates parameter
    // gradients into their stores.
    void backward(V loss);

    Node& node(int i) { return *nodes_[static_cast<std::size_t>(i)]; }
    const Node& node(int i) const { return *nodes_[static_cast<std::size_t>(i)]; }

  private:
    V push(Tensor value, bool needs_grad, const char* op);
    std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace rnsde::ad
