#include "doctest.h"

#include <cmath>

#include "rnsde/optim.hpp"

using namespace rnsde;

TEST_SUITE_BEGIN("optim");

TEST_CASE("adamw converges on a quadratic bowl") {
    // f(p) = 0.5 * sum (p - c)^2, grad = p - c
    ParamStore ps;
    ps.add("p", Tensor({4}, 5.0f));
    const float c[4] = {-1.0f, 0.5f, 2.0f, 3.0f};
    AdamW opt({.lr = 0.05, .total_steps = 2000});
    for (int step = 0; step < 2000; ++step) {
        ps.zero_grad();
        auto& e = ps.entry("p");
        for (int i = 0; i < 4; ++i) e.grad[static_cast<std::size_t>(i)] = e.value[i] - c[i];
        opt.step(ps);
    }
    for (int i = 0; i < 4; ++i)
        CHECK(ps.entry("p").value[static_cast<std::size_t>(i)] == doctest::Approx(c[i]).epsilon(1e-2));
}

TEST_CASE("nan gradient aborts the step") {
    ParamStore ps;
    ps.add("p", Tensor({1}, 1.0f));
    AdamW opt({.lr = 0.1});
    ps.entry("p").grad[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS(opt.step(ps));
}

TEST_CASE("weight decay pulls parameters toward zero") {
    ParamStore ps;
    ps.add("p", Tensor({1}, 1.0f));
    AdamW opt({.lr = 0.01, .weight_decay = 0.1});
    for (int i = 0; i < 100; ++i) {
        ps.zero_grad();  // zero task gradient: only decay acts
        opt.step(ps);
    }
    CHECK(std::abs(ps.entry("p").value[0]) < 1.0f);
}

TEST_SUITE_END();
