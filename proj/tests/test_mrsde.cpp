#include "doctest.h"

#include <cmath>

#include "rnsde/mrsde.hpp"
#include "rnsde/rng.hpp"

using namespace rnsde;

TEST_SUITE_BEGIN("mrsde");

TEST_CASE("cosine schedule invariants") {
    for (int T : {50, 200, 1000}) {
        DiffusionSchedule s = make_schedule(T, 0.01);
        CHECK(s.theta_bar.size() == static_cast<std::size_t>(T) + 1);
        CHECK(s.tb(0) == 0.0);
        for (int t = 1; t <= T; ++t) {
            CHECK(s.tb(t) > s.tb(t - 1));                    // strictly increasing
            CHECK(s.th(t) == doctest::Approx(s.tb(t) - s.tb(t - 1)));
            CHECK(s.sig2(t) == doctest::Approx(2.0 * s.lambda2 * s.th(t)));
        }
        CHECK(std::exp(-s.tb(T)) <= 1e-4);  // initial state is forgotten at t = T
    }
    CHECK_THROWS(make_schedule(0, 0.01));
    CHECK_THROWS(make_schedule(100, -1.0));
}

TEST_CASE("marginal matches the OU closed form") {
    DiffusionSchedule s = make_schedule(200, 0.01);
    Marginal m0 = forward_marginal(s, 0);
    CHECK(m0.mean_coef == doctest::Approx(1.0));
    CHECK(m0.var == doctest::Approx(0.0));

    Marginal mT = forward_marginal(s, 200);
    CHECK(mT.mean_coef <= 1e-4);
    CHECK(mT.var == doctest::Approx(s.lambda2).epsilon(1e-3));

    for (int t : {1, 50, 137}) {
        Marginal m = forward_marginal(s, t);
        CHECK(m.mean_coef == doctest::Approx(std::exp(-s.tb(t))));
        CHECK(m.var == doctest::Approx(s.lambda2 * (1.0 - std::exp(-2.0 * s.tb(t)))));
    }
}

TEST_CASE("transition sampling has exact bridge moments") {
    DiffusionSchedule s = make_schedule(100, 0.01);
    Tensor x0({1}, 0.8f);
    Tensor mu({1}, 0.1f);
    Rng rng(21);
    const int from = 30, to = 55;
    const double decay = std::exp(-(s.tb(to) - s.tb(from)));
    const double var = s.lambda2 * (1.0 - decay * decay);
    double mean_acc = 0.0, sq_acc = 0.0;
    const int N = 200000;
    for (int i = 0; i < N; ++i) {
        Tensor xt = forward_transition(x0, mu, from, to, s, rng);
        mean_acc += xt[0];
        sq_acc += static_cast<double>(xt[0]) * xt[0];
    }
    const double mean = mean_acc / N;
    const double sample_var = sq_acc / N - mean * mean;
    const double expect_mean = 0.1 + (0.8 - 0.1) * decay;
    CHECK(mean == doctest::Approx(expect_mean).epsilon(0.01));
    CHECK(sample_var == doctest::Approx(var).epsilon(0.05));
}

TEST_CASE("posterior-step coefficients reproduce the marginal mean chain") {
    // with x_t at its conditional mean and x0_hat = x0, the posterior step
    // must land on the t-1 conditional mean
    DiffusionSchedule s = make_schedule(200, 0.01);
    const double x0 = 0.7, mu = -0.2;
    for (int t = 1; t <= 200; ++t) {
        const ReverseCoeffs rc = reverse_coeffs(s, t);
        const double mt = mu + (x0 - mu) * std::exp(-s.tb(t));
        const double mtm1 = mu + (x0 - mu) * std::exp(-s.tb(t - 1));
        const double stepped = rc.coef_a * (mt - mu) + rc.H * (x0 - mu) + mu;
        CHECK(std::abs(stepped - mtm1) <= 1e-6);
    }
}

TEST_CASE("reverse coefficient identities") {
    DiffusionSchedule s = make_schedule(200, 0.01);
    for (int t : {1, 2, 77, 200}) {
        const ReverseCoeffs rc = reverse_coeffs(s, t);
        CHECK(rc.theta_prime == doctest::Approx(s.th(t)));
        CHECK(rc.coef_a == doctest::Approx(rc.G + rc.theta_prime + 1.0));
        CHECK(rc.H > 0.0);
        const double expect_H = (1.0 - std::exp(-2.0 * s.th(t))) /
                                (1.0 - std::exp(-2.0 * s.tb(t))) * std::exp(-s.tb(t - 1));
        CHECK(rc.H == doctest::Approx(expect_H));
    }
    CHECK_THROWS(reverse_coeffs(s, 0));
    CHECK_THROWS(reverse_coeffs(s, 201));
}

TEST_CASE("euler discretization tracks the exact transition") {
    DiffusionSchedule s = make_schedule(1000, 0.01);
    CorrespondenceReport r = ddpm_correspondence_check(s);
    CHECK(r.max_mean_dev <= 1e-3);
    CHECK(r.max_var_dev <= 1e-3);         // against the state scale lambda^2
    CHECK(r.max_var_dev_rel_increment < 0.05);  // per-increment figure, reported honestly
}

TEST_CASE("conditional score matches the Gaussian gradient") {
    DiffusionSchedule s = make_schedule(100, 0.01);
    Tensor x0({2}), mu({2}), xt({2});
    x0[0] = 0.3f; x0[1] = -0.5f;
    mu[0] = 0.1f; mu[1] = 0.2f;
    xt[0] = 0.25f; xt[1] = 0.0f;
    const int t = 40;
    Tensor sc = conditional_score(xt, x0, mu, t, s);
    const Marginal m = forward_marginal(s, t);
    for (int i = 0; i < 2; ++i) {
        const double mean = mu[static_cast<std::size_t>(i)] +
                            (x0[static_cast<std::size_t>(i)] - mu[static_cast<std::size_t>(i)]) *
                                m.mean_coef;
        CHECK(sc[static_cast<std::size_t>(i)] ==
              doctest::Approx(-(xt[static_cast<std::size_t>(i)] - mean) / m.var));
    }
}

TEST_SUITE_END();
