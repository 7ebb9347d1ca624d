#include "doctest.h"

#include <cmath>
#include <limits>

#include "rnsde/kernels.hpp"
#include "rnsde/metrics.hpp"
#include "rnsde/rng.hpp"
#include "rnsde/tomo.hpp"

using namespace rnsde;

namespace {

Tensor disk(int n, double r, float v = 0.8f) {
    Tensor img({n, n});
    const double c = (n - 1) / 2.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int hit = 0;
            for (int si = 0; si < 4; ++si)
                for (int sj = 0; sj < 4; ++sj) {
                    const double y = i + (si + 0.5) / 4.0 - 0.5 - c;
                    const double x = j + (sj + 0.5) / 4.0 - 0.5 - c;
                    if (x * x + y * y <= r * r) ++hit;
                }
            img.at(i, j) = v * static_cast<float>(hit) / 16.0f;
        }
    return img;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("psnr closed forms") {
    Tensor a({4, 4}, 0.5f), b({4, 4}, 0.5f);
    CHECK(std::isinf(psnr(a, b)));

    // constant offset 0.01 -> MSE 1e-4 -> 40 dB
    for (auto& v : b.data) v += 0.01f;
    CHECK(psnr(a, b) == doctest::Approx(40.0).epsilon(1e-4));

    Tensor c({2, 2});
    CHECK_THROWS(psnr(a, c));
}

TEST_CASE("psnr decreases as noise grows") {
    Rng rng(1);
    Tensor ref({16, 16}, 0.5f);
    double last = std::numeric_limits<double>::infinity();
    for (double sd : {0.01, 0.03, 0.1}) {
        Rng noise(2);
        Tensor x = ref;
        for (auto& v : x.data) v += static_cast<float>(sd * noise.normal());
        const double p = psnr(x, ref);
        CHECK(p < last);
        last = p;
    }
}

TEST_CASE("ssim identities and closed form") {
    Rng rng(3);
    Tensor a({16, 16});
    for (auto& v : a.data) v = static_cast<float>(0.5 + 0.2 * rng.normal());
    CHECK(ssim(a, a) == doctest::Approx(1.0));

    Tensor b = a;
    for (auto& v : b.data) v = 1.0f - v;
    CHECK(ssim(a, b) < 1.0);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-9));

    // constants: variance terms vanish, covariance term is C2/C2 == 1
    Tensor c1({12, 12}, 0.3f), c2({12, 12}, 0.4f);
    const double C1 = 0.01 * 0.01;
    const double expect = (2.0 * 0.3 * 0.4 + C1) / (0.3 * 0.3 + 0.4 * 0.4 + C1);
    CHECK(ssim(c1, c2) == doctest::Approx(expect).epsilon(1e-4));

    Tensor tiny({8, 8}, 0.1f);
    CHECK_THROWS(ssim(tiny, tiny));
}

TEST_CASE("consistency error basics") {
    const int n = 32;
    Tensor img = disk(n, 10.0);
    Geometry g = make_geometry(n, 90.0, 3.0);
    Sinogram y = radon(img, g);
    CHECK(consistency_error(img, y) <= 1e-5);

    Tensor zero({n, n});
    const double norm_y = std::sqrt(kern::sumsq(y.values.data.data(), y.values.size()));
    CHECK(consistency_error(zero, y) == doctest::Approx(norm_y).epsilon(1e-6));
}

TEST_CASE("tv solver: heavier penalty yields smoother solutions") {
    const int n = 24;
    Tensor img = disk(n, 8.0);
    Geometry g = make_geometry(n, 0.0, 10.0);
    Sinogram y = radon(img, g);
    const double tv0 = tv_value(tv_reconstruct(y, n, 0.0, 100));
    const double tv5 = tv_value(tv_reconstruct(y, n, 5.0, 100));
    const double tv50 = tv_value(tv_reconstruct(y, n, 50.0, 100));
    CHECK(tv5 < tv0);
    CHECK(tv50 < tv5);
    CHECK(tv50 < 0.6 * tv0);  // heavy penalty flattens substantially
}

TEST_CASE("tv solver improves on fbp under a missing wedge") {
    const int n = 32;
    Tensor img = disk(n, 10.0);
    Geometry g = make_geometry(n, 90.0, 2.0);
    Sinogram y = radon(img, g);
    const double p_fbp = psnr(fbp(y, n), img);
    const double p_tv = psnr(tv_reconstruct(y, n, 5e-4, 60), img);
    CHECK(p_tv > p_fbp);
}

TEST_CASE("tv objective is monotone under lambda zero gradient descent") {
    const int n = 24;
    Tensor img = disk(n, 8.0);
    Geometry g = make_geometry(n, 0.0, 6.0);
    Sinogram y = radon(img, g);
    // lambda == 0 reduces to plain least squares; the result must fit better
    // than its fbp starting point
    Tensor rec = tv_reconstruct(y, n, 0.0, 40);
    CHECK(consistency_error(rec, y) <= consistency_error(fbp(y, n), y) + 1e-9);
}

TEST_SUITE_END();
