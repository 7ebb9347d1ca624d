#include "doctest.h"

#include <cmath>

#include "rnsde/sampler.hpp"

using namespace rnsde;

TEST_SUITE_BEGIN("sampler");

TEST_CASE("time-travel step counts") {
    CHECK(time_travel_steps(200, 4, 2) == 593);
    CHECK(time_travel_steps(200, 8, 2) == 585);
    for (int T : {10, 100}) CHECK(time_travel_steps(T, 3, 1) == T + 1);
    CHECK_THROWS(time_travel_steps(0, 1, 1));
}

namespace {

struct Setup {
    DiffusionSchedule sched = make_schedule(40, 0.01);
    Tensor m0{{8, 8}, 0.5f};
    Tensor var0{{8, 8}, 0.04f};
    Tensor mu{{8, 8}, 0.0f};
    GaussianOracle oracle{m0, var0, sched};
};

}  // namespace

TEST_CASE("trace length equals the step-count formula") {
    Setup s;
    for (auto [l, r] : {std::pair{1, 1}, {4, 2}, {5, 3}}) {
        SamplerConfig cfg;
        cfg.travel_l = l;
        cfg.travel_r = r;
        cfg.seed = 77;
        SampleResult res = sample(std::nullopt, s.mu, s.oracle, nullptr, s.sched, cfg);
        CHECK(static_cast<long>(res.trace.records.size()) ==
              time_travel_steps(s.sched.T, l, r));
    }
}

TEST_CASE("sampling is deterministic per seed") {
    Setup s;
    SamplerConfig cfg;
    cfg.seed = 123;
    Tensor a = sample(std::nullopt, s.mu, s.oracle, nullptr, s.sched, cfg).image;
    Tensor b = sample(std::nullopt, s.mu, s.oracle, nullptr, s.sched, cfg).image;
    CHECK(a.data == b.data);
    cfg.seed = 124;
    Tensor c = sample(std::nullopt, s.mu, s.oracle, nullptr, s.sched, cfg).image;
    CHECK(a.data != c.data);
}

TEST_CASE("oracle sampling recovers the target moments") {
    // scalar version of the Gaussian-target experiment, small run
    DiffusionSchedule sched = make_schedule(100, 0.01);
    Tensor m0({1}, 0.5f), var0({1}, 0.04f), mu({1}, 0.0f);
    GaussianOracle oracle(m0, var0, sched);
    double acc = 0.0, sq = 0.0;
    const int N = 1500;
    for (int i = 0; i < N; ++i) {
        SamplerConfig cfg;
        cfg.seed = 1000 + static_cast<unsigned long long>(i);
        Tensor x = sample(std::nullopt, mu, oracle, nullptr, sched, cfg).image;
        acc += x[0];
        sq += static_cast<double>(x[0]) * x[0];
    }
    const double mean = acc / N;
    const double var = sq / N - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.05));
    CHECK(var == doctest::Approx(0.04).epsilon(0.15));
}

TEST_CASE("extract_x0 with the exact conditional score recovers x0") {
    DiffusionSchedule sched = make_schedule(200, 0.01);
    Rng rng(31);
    Tensor x0({8, 8}), mu({8, 8});
    for (auto& v : x0.data) v = static_cast<float>(0.5 + 0.2 * rng.normal());
    for (auto& v : mu.data) v = static_cast<float>(0.1 * rng.normal());

    struct ExactScore : ScoreFunction {
        Tensor x0;
        const DiffusionSchedule* sched;
        Tensor evaluate(const Tensor& x_t, const Tensor& m, int t) override {
            // the extraction formula inverts the posterior-matched score form
            return optimal_score(x_t, x0, m, t, *sched);
        }
    } score;
    score.x0 = x0;
    score.sched = &sched;

    for (int t : {1, 5, 60, 140, 200}) {
        const Marginal m = forward_marginal(sched, t);
        Tensor x_t(x0.shape);
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            const double mean = mu[i] + (x0[i] - mu[i]) * m.mean_coef;
            x_t[i] = static_cast<float>(mean + std::sqrt(m.var) * rng.normal());
        }
        Tensor rec = extract_x0(x_t, mu, t, score, sched);
        for (std::size_t i = 0; i < rec.size(); ++i)
            CHECK(std::abs(rec[i] - x0[i]) <= 1e-4);
    }
}

TEST_CASE("rectification records only off-beta steps") {
    const int n = 16;
    Geometry g = make_geometry(n, 90.0, 6.0);
    Rng rng(41);
    LearnablePinv pinv(g, n, {}, rng);

    Setup s;
    DiffusionSchedule sched = make_schedule(30, 0.01);
    Tensor m0({n, n}, 0.4f), var0({n, n}, 0.02f), mu({n, n}, 0.0f);
    GaussianOracle oracle(m0, var0, sched);
    Tensor truth({n, n}, 0.4f);
    Sinogram y = radon(truth, g);

    SamplerConfig cfg;
    cfg.skip_beta = 3;
    cfg.seed = 5;
    SampleResult res = sample(y, mu, oracle, &pinv, sched, cfg);
    for (const auto& r : res.trace.records) {
        if (r.phase != 'r') continue;
        CHECK(r.rectified == (r.t % 3 != 0));
        CHECK(std::isfinite(r.consistency_error));
    }
}

TEST_CASE("sample average returns the pixel mean of independent runs") {
    Setup s;
    SamplerConfig cfg;
    cfg.seed = 9;
    cfg.sa_count = 3;
    Tensor avg = sample_average(std::nullopt, s.mu, s.oracle, nullptr, s.sched, cfg);
    CHECK(avg.shape == s.mu.shape);
    CHECK(avg.all_finite());
    Tensor avg2 = sample_average(std::nullopt, s.mu, s.oracle, nullptr, s.sched, cfg);
    CHECK(avg.data == avg2.data);
    CHECK_THROWS(sample_average(std::nullopt, s.mu, s.oracle, nullptr, s.sched,
                                SamplerConfig{.sa_count = 0}));
}

TEST_SUITE_END();
