#pragma once

#include <complex>
#include <vector>

namespace rnsde {

// Radix-2 in-place FFT for power-of-two lengths; plain DFT fallback otherwise.
std::vector<std::complex<double>> fft_1d(const std::vector<std::complex<double>>& x);
std::vector<std::complex<double>> ifft_1d(const std::vector<std::complex<double>>& x);

std::vector<std::complex<double>> fft_real(const std::vector<double>& x);

int next_pow2(int n);

}  // namespace rnsde
