#include "doctest.h"

#include <cmath>
#include <functional>
#include <map>

#include "rnsde/autodiff.hpp"
#include "rnsde/rng.hpp"

using namespace rnsde;

namespace {

Tensor randn(std::vector<int> shape, Rng& rng, double sd = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(sd * rng.normal());
    return t;
}

// Central finite differences on every parameter in the store against the tape
// gradient of a scalar-valued builder.
void check_grads(ParamStore& store, const std::function<double(ad::Tape&)>& build,
                 double tol = 1e-4, double eps = 4e-3) {
    store.zero_grad();
    {
        ad::Tape t;
        (void)build(t);
    }
    std::map<std::string, Tensor> analytic;
    for (const auto& [name, e] : store.entries()) analytic[name] = e.grad;

    for (auto& [name, e] : store.entries()) {
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const float orig = e.value[i];
            e.value[i] = orig + static_cast<float>(eps);
            double fp, fm;
            {
                ad::Tape t;
                fp = build(t);
            }
            e.value[i] = orig - static_cast<float>(eps);
            {
                ad::Tape t;
                fm = build(t);
            }
            e.value[i] = orig;
            const double num = (fp - fm) / (2.0 * eps);
            const double ana = analytic.at(name)[i];
            const double denom = std::max({1.0, std::abs(num), std::abs(ana)});
            INFO(name << "[" << i << "] numeric=" << num << " analytic=" << ana);
            CHECK(std::abs(num - ana) / denom <= tol);
        }
        store.zero_grad();  // FD passes also ran backward; analytic copy is authoritative
    }
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("elementwise ops differentiate") {
    Rng rng(1);
    ParamStore ps;
    ps.add("a", randn({5}, rng));
    ps.add("b", randn({5}, rng));
    auto build = [&](ad::Tape& t) {
        ad::V a = t.param(ps, "a");
        ad::V b = t.param(ps, "b");
        ad::V y = t.add(t.mul(a, b), t.scale(t.sub(a, b), 0.5f));
        y = t.add_const(y, 0.25f);
        ad::V loss = t.mean_all(t.mul(y, y));
        t.backward(loss);
        return static_cast<double>(loss.value()[0]);
    };
    ps.zero_grad();
    check_grads(ps, build);
}

TEST_CASE("conv2d gradients wrt weights, bias and input path") {
    Rng rng(2);
    ParamStore ps;
    ps.add("x", randn({2, 6, 6}, rng, 0.5));
    ps.add("w1", randn({3, 2, 3, 3}, rng, 0.3));
    ps.add("b1", randn({3}, rng, 0.1));
    ps.add("w2", randn({1, 3, 3, 3}, rng, 0.3));
    auto build = [&](ad::Tape& t) {
        ad::V h = t.conv2d(t.param(ps, "x"), t.param(ps, "w1"), t.param(ps, "b1"));
        h = t.conv2d(h, t.param(ps, "w2"));
        ad::V loss = t.mean_all(t.mul(h, h));
        t.backward(loss);
        return static_cast<double>(loss.value()[0]);
    };
    ps.zero_grad();
    check_grads(ps, build);
}

TEST_CASE("dilated conv2d gradients and degenerate dilation") {
    Rng rng(5);
    ParamStore ps;
    ps.add("x", randn({2, 8, 8}, rng, 0.5));
    ps.add("w1", randn({2, 2, 3, 3}, rng, 0.3));
    ps.add("w2", randn({1, 2, 3, 3}, rng, 0.3));
    auto build = [&](ad::Tape& t) {
        ad::V h = t.conv2d(t.param(ps, "x"), t.param(ps, "w1"), {}, 2);
        h = t.conv2d(h, t.param(ps, "w2"), {}, 3);
        ad::V loss = t.mean_all(t.mul(h, h));
        t.backward(loss);
        return static_cast<double>(loss.value()[0]);
    };
    ps.zero_grad();
    check_grads(ps, build);

    // dilation 1 must match the plain path bitwise
    ad::Tape t1, t2;
    ad::V a = t1.conv2d(t1.param(ps, "x"), t1.param(ps, "w1"));
    ad::V b = t2.conv2d(t2.param(ps, "x"), t2.param(ps, "w1"), {}, 1);
    for (std::size_t i = 0; i < a.value().size(); ++i) CHECK(a.value()[i] == b.value()[i]);
}

TEST_CASE("conv2d validates channel and tap-parity") {
    ad::Tape t;
    ad::V x = t.leaf(Tensor({2, 4, 4}));
    CHECK_THROWS(t.conv2d(x, t.leaf(Tensor({1, 3, 3, 3}))));  // channel mismatch
    CHECK_THROWS(t.conv2d(x, t.leaf(Tensor({1, 2, 2, 2}))));  // even taps
}

TEST_CASE("linear, scale_shift and simple_gate differentiate") {
    Rng rng(3);
    ParamStore ps;
    ps.add("x", randn({4, 5, 5}, rng, 0.5));
    ps.add("w", randn({4, 6}, rng, 0.2));
    ps.add("b", randn({4}, rng, 0.1));
    ps.add("emb", randn({6}, rng));
    auto build = [&](ad::Tape& t) {
        ad::V s = t.linear(t.param(ps, "emb"), t.param(ps, "w"), t.param(ps, "b"));
        ad::V h = t.scale_shift(t.param(ps, "x"), s, s);
        h = t.simple_gate(h);
        ad::V loss = t.mean_all(t.mul(h, h));
        t.backward(loss);
        return static_cast<double>(loss.value()[0]);
    };
    ps.zero_grad();
    check_grads(ps, build);
}

TEST_CASE("concat and losses differentiate") {
    Rng rng(4);
    ParamStore ps;
    ps.add("a", randn({1, 4, 4}, rng));
    ps.add("b", randn({1, 4, 4}, rng));
    Tensor target = randn({2, 4, 4}, rng);
    auto build_l2 = [&](ad::Tape& t) {
        ad::V c = t.concat_ch(t.param(ps, "a"), t.param(ps, "b"));
        ad::V loss = t.l2_loss(c, t.leaf(target));
        t.backward(loss);
        return static_cast<double>(loss.value()[0]);
    };
    ps.zero_grad();
    check_grads(ps, build_l2);

    auto build_l1 = [&](ad::Tape& t) {
        ad::V c = t.concat_ch(t.param(ps, "a"), t.param(ps, "b"));
        ad::V loss = t.l1_loss(c, t.leaf(target));
        t.backward(loss);
        return static_cast<double>(loss.value()[0]);
    };
    ps.zero_grad();
    check_grads(ps, build_l1, 1e-3);  // |.| is only piecewise smooth
}

TEST_CASE("linear_op uses the supplied adjoint") {
    Rng rng(5);
    ParamStore ps;
    ps.add("x", randn({3, 3}, rng));
    // fixed operator: transpose
    auto fwd = [](const Tensor& in, Tensor& out) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) out.at(j, i) = in.at(i, j);
    };
    auto build = [&](ad::Tape& t) {
        ad::V y = t.linear_op(t.param(ps, "x"), {3, 3}, fwd, fwd, "transpose");
        ad::V loss = t.mean_all(t.mul(y, y));
        t.backward(loss);
        return static_cast<double>(loss.value()[0]);
    };
    ps.zero_grad();
    check_grads(ps, build);
}

TEST_CASE("dropout scales kept activations and is off at inference") {
    Rng rng(6);
    Tensor x({1, 8, 8}, 1.0f);
    ad::Tape t;
    ad::V xx = t.leaf(x, true);
    ad::V d = t.dropout(xx, 0.5f, rng, true);
    int zeros = 0;
    for (float v : d.value().data) {
        if (v == 0.0f)
            ++zeros;
        else
            CHECK(v == doctest::Approx(2.0f));  // 1/(1-p)
    }
    CHECK(zeros > 0);
    CHECK(zeros < 64);

    ad::Tape t2;
    ad::V d2 = t2.dropout(t2.leaf(x), 0.5f, rng, false);
    CHECK(d2.value().data == x.data);
}

TEST_CASE("backward demands a scalar loss") {
    ad::Tape t;
    ad::V x = t.leaf(Tensor({3}), true);
    CHECK_THROWS(t.backward(x));
}

TEST_SUITE_END();
