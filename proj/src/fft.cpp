#include "rnsde/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rnsde {
namespace {

using cd = std::complex<double>;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void fft_pow2(std::vector<cd>& a, bool inverse) {
    const int n = static_cast<int>(a.size());
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / len * (inverse ? 1.0 : -1.0);
        const cd wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                cd u = a[i + k];
                cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::vector<cd> dft_naive(const std::vector<cd>& x, bool inverse) {
    const int n = static_cast<int>(x.size());
    std::vector<cd> out(n);
    const double sgn = inverse ? 1.0 : -1.0;
    for (int k = 0; k < n; ++k) {
        cd acc(0.0, 0.0);
        for (int j = 0; j < n; ++j) {
            const double ang = sgn * 2.0 * std::numbers::pi * k * j / n;
            acc += x[j] * cd(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

std::vector<cd> transform(const std::vector<cd>& x, bool inverse) {
    if (x.empty()) throw std::invalid_argument("fft of empty signal");
    std::vector<cd> a;
    if (is_pow2(static_cast<int>(x.size()))) {
        a = x;
        fft_pow2(a, inverse);
    } else {
        a = dft_naive(x, inverse);
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(a.size());
        for (auto& v : a) v *= inv;
    }
    return a;
}

}  // namespace

std::vector<cd> fft_1d(const std::vector<cd>& x) { return transform(x, false); }
std::vector<cd> ifft_1d(const std::vector<cd>& x) { return transform(x, true); }

std::vector<cd> fft_real(const std::vector<double>& x) {
    std::vector<cd> c(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) c[i] = cd(x[i], 0.0);
    return fft_1d(c);
}

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace rnsde
