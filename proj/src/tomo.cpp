#include "rnsde/tomo.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rnsde/fft.hpp"

namespace rnsde {

Geometry make_geometry(int num_detectors, double theta_miss_deg, double angle_step_deg) {
    if (num_detectors < 2) throw std::invalid_argument("geometry: need >= 2 detectors");
    if (angle_step_deg <= 0.0) throw std::invalid_argument("geometry: bad angle step");
    if (theta_miss_deg < 0.0 || theta_miss_deg >= 180.0)
        throw std::invalid_argument("geometry: theta_miss out of range");
    Geometry g;
    g.num_detectors = num_detectors;
    g.theta_miss_deg = theta_miss_deg;
    g.angle_step_deg = angle_step_deg;
    const double last = 180.0 - theta_miss_deg;
    for (double a = 0.0; a <= last + 1e-9; a += angle_step_deg) {
        if (a >= 180.0 - 1e-9) break;  // keep angles inside [0, pi)
        g.angles.push_back(a * std::numbers::pi / 180.0);
    }
    return g;
}

namespace {

struct JosephSetup {
    double c, s, w;  // direction cosines and 1/max(|c|,|s|)
    bool sweep_x;    // true: iterate over x columns, interpolate in y
};

JosephSetup setup(double angle) {
    JosephSetup j;
    j.c = std::cos(angle);
    j.s = std::sin(angle);
    j.sweep_x = std::fabs(j.s) >= std::fabs(j.c);
    j.w = 1.0 / (j.sweep_x ? std::fabs(j.s) : std::fabs(j.c));
    return j;
}

void check_square(const Tensor& image) {
    if (image.ndim() != 2 || image.dim(0) != image.dim(1))
        throw std::invalid_argument("radon: image must be a square 2-D tensor");
}

}  // namespace

Sinogram radon(const Tensor& image, const Geometry& geom) {
    check_square(image);
    const int n = image.dim(0);
    const int D = geom.num_detectors;
    const double cx = (n - 1) / 2.0;
    const double d0 = (D - 1) / 2.0;
    Sinogram out{geom, Tensor({geom.num_angles(), D})};
    for (int a = 0; a < geom.num_angles(); ++a) {
        const JosephSetup j = setup(geom.angles[static_cast<std::size_t>(a)]);
        for (int d = 0; d < D; ++d) {
            const double r = d - d0;
            double acc = 0.0;
            if (j.sweep_x) {
                for (int x = 0; x < n; ++x) {
                    const double y = (r - (x - cx) * j.c) / j.s + cx;
                    const int iy = static_cast<int>(std::floor(y));
                    const double f = y - iy;
                    if (iy >= 0 && iy < n) acc += (1.0 - f) * image.at(iy, x);
                    if (iy + 1 >= 0 && iy + 1 < n) acc += f * image.at(iy + 1, x);
                }
            } else {
                for (int y = 0; y < n; ++y) {
                    const double x = (r - (y - cx) * j.s) / j.c + cx;
                    const int ix = static_cast<int>(std::floor(x));
                    const double f = x - ix;
                    if (ix >= 0 && ix < n) acc += (1.0 - f) * image.at(y, ix);
                    if (ix + 1 >= 0 && ix + 1 < n) acc += f * image.at(y, ix + 1);
                }
            }
            out.values.at(a, d) = static_cast<float>(acc * j.w);
        }
    }
    return out;
}

Tensor backproject(const Sinogram& sino, int height, int width) {
    if (height != width) throw std::invalid_argument("backproject: square output expected");
    const int n = height;
    const int D = sino.geom.num_detectors;
    const double cx = (n - 1) / 2.0;
    const double d0 = (D - 1) / 2.0;
    Tensor img({n, n});
    for (int a = 0; a < sino.geom.num_angles(); ++a) {
        const JosephSetup j = setup(sino.geom.angles[static_cast<std::size_t>(a)]);
        for (int d = 0; d < D; ++d) {
            const double v = sino.values.at(a, d) * j.w;
            if (v == 0.0) continue;
            const double r = d - d0;
            if (j.sweep_x) {
                for (int x = 0; x < n; ++x) {
                    const double y = (r - (x - cx) * j.c) / j.s + cx;
                    const int iy = static_cast<int>(std::floor(y));
                    const double f = y - iy;
                    if (iy >= 0 && iy < n) img.at(iy, x) += static_cast<float>((1.0 - f) * v);
                    if (iy + 1 >= 0 && iy + 1 < n) img.at(iy + 1, x) += static_cast<float>(f * v);
                }
            } else {
                for (int y = 0; y < n; ++y) {
                    const double x = (r - (y - cx) * j.s) / j.c + cx;
                    const int ix = static_cast<int>(std::floor(x));
                    const double f = x - ix;
                    if (ix >= 0 && ix < n) img.at(y, ix) += static_cast<float>((1.0 - f) * v);
                    if (ix + 1 >= 0 && ix + 1 < n) img.at(y, ix + 1) += static_cast<float>(f * v);
                }
            }
        }
    }
    return img;
}

double ramlak_kernel(int k) {
    if (k == 0) return 0.25;
    if (k % 2 == 0) return 0.0;
    return -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(k) * k);
}

Sinogram ramp_filter(const Sinogram& sino, RampWindow window) {
    const int A = sino.geom.num_angles();
    const int D = sino.geom.num_detectors;
    const int np = next_pow2(2 * D);

    // frequency response of the band-limited ramp
    std::vector<double> h(static_cast<std::size_t>(np), 0.0);
    for (int k = 0; k < np; ++k) {
        const int kk = k <= np / 2 ? k : k - np;
        h[static_cast<std::size_t>(k)] = ramlak_kernel(kk);
    }
    auto Hf = fft_real(h);
    if (window == RampWindow::hann) {
        for (int k = 0; k < np; ++k) {
            const double f = static_cast<double>(k <= np / 2 ? k : np - k) / np;  // cycles/sample
            Hf[static_cast<std::size_t>(k)] *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * f));
        }
    }

    Sinogram out{sino.geom, Tensor({A, D})};
    std::vector<std::complex<double>> row(static_cast<std::size_t>(np));
    for (int a = 0; a < A; ++a) {
        for (int k = 0; k < np; ++k)
            row[static_cast<std::size_t>(k)] =
                k < D ? std::complex<double>(sino.values.at(a, k), 0.0) : 0.0;
        auto spec = fft_1d(row);
        for (int k = 0; k < np; ++k) spec[static_cast<std::size_t>(k)] *= Hf[static_cast<std::size_t>(k)];
        auto filt = ifft_1d(spec);
        for (int d = 0; d < D; ++d)
            out.values.at(a, d) = static_cast<float>(filt[static_cast<std::size_t>(d)].real());
    }
    return out;
}

Tensor fbp(const Sinogram& sino, int output_size) {
    const int A = sino.geom.num_angles();
    Tensor img = backproject(ramp_filter(sino), output_size, output_size);
    const float scale = static_cast<float>(std::numbers::pi / A);
    const double cx = (output_size - 1) / 2.0;
    const double rad = output_size / 2.0;
    for (int y = 0; y < output_size; ++y)
        for (int x = 0; x < output_size; ++x) {
            const double rr = std::hypot(x - cx, y - cx);
            img.at(y, x) = rr <= rad ? img.at(y, x) * scale : 0.0f;
        }
    return img;
}

}  // namespace rnsde
