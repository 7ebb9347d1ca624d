#include "doctest.h"

#include <cmath>
#include <vector>

#include "rnsde/kernels.hpp"
#include "rnsde/rng.hpp"

using namespace rnsde;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("scalar table basic results") {
    kern::force(kern::scalar_table);
    std::vector<float> x = {1, 2, 3, 4, 5};
    std::vector<float> y = {1, 1, 1, 1, 1};
    kern::axpy(2.0f, x.data(), y.data(), 5);
    CHECK(y[0] == 3.0f);
    CHECK(y[4] == 11.0f);
    CHECK(kern::sum(x.data(), 5) == doctest::Approx(15.0));
    CHECK(kern::sumsq(x.data(), 5) == doctest::Approx(55.0));
    CHECK(kern::dot(x.data(), x.data(), 5) == doctest::Approx(55.0));
    kern::reset_dispatch();
}

#if RNSDE_HAVE_AVX2
TEST_CASE("avx2 matches scalar on awkward lengths") {
    Rng rng(11);
    for (std::size_t n : {1u, 7u, 8u, 9u, 31u, 64u, 1000u, 4097u}) {
        std::vector<float> a = random_vec(n, rng);
        std::vector<float> b = random_vec(n, rng);

        for (auto op : {0, 1, 2, 3}) {
            std::vector<float> zs(n), zv(n);
            kern::force(kern::scalar_table);
            if (op == 0) kern::add(a.data(), b.data(), zs.data(), n);
            if (op == 1) kern::sub(a.data(), b.data(), zs.data(), n);
            if (op == 2) kern::mul(a.data(), b.data(), zs.data(), n);
            if (op == 3) kern::scale(1.5f, -0.25f, a.data(), zs.data(), n);
            kern::force(kern::avx2_table);
            if (op == 0) kern::add(a.data(), b.data(), zv.data(), n);
            if (op == 1) kern::sub(a.data(), b.data(), zv.data(), n);
            if (op == 2) kern::mul(a.data(), b.data(), zv.data(), n);
            if (op == 3) kern::scale(1.5f, -0.25f, a.data(), zv.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(zs[i] == doctest::Approx(zv[i]).epsilon(1e-6));
        }

        std::vector<float> ys = b, yv = b;
        kern::force(kern::scalar_table);
        kern::axpy(0.7f, a.data(), ys.data(), n);
        const double ds = kern::dot(a.data(), b.data(), n);
        const double ss = kern::sum(a.data(), n);
        const double qs = kern::sumsq(a.data(), n);
        const double as = kern::sumabs(a.data(), n);
        kern::force(kern::avx2_table);
        kern::axpy(0.7f, a.data(), yv.data(), n);
        CHECK(kern::dot(a.data(), b.data(), n) == doctest::Approx(ds).epsilon(1e-10));
        CHECK(kern::sum(a.data(), n) == doctest::Approx(ss).epsilon(1e-10));
        CHECK(kern::sumsq(a.data(), n) == doctest::Approx(qs).epsilon(1e-10));
        CHECK(kern::sumabs(a.data(), n) == doctest::Approx(as).epsilon(1e-10));
        for (std::size_t i = 0; i < n; ++i) CHECK(ys[i] == doctest::Approx(yv[i]).epsilon(1e-6));
    }
    kern::reset_dispatch();
}
#endif

TEST_CASE("dispatch reports a table name") {
    kern::reset_dispatch();
    CHECK_FALSE(kern::active_name().empty());
}

TEST_SUITE_END();
