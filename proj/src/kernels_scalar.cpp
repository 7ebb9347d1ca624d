#include "rnsde/kernels.hpp"

#include <cmath>

namespace rnsde::kern {
namespace {

void axpy_s(float a, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_s(const float* x, const float* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * y[i];
    return acc;
}

void add_s(const float* x, const float* y, float* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

void sub_s(const float* x, const float* y, float* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] - y[i];
}

void mul_s(const float* x, const float* y, float* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

void scale_s(float a, float b, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

double sum_s(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sumsq_s(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * x[i];
    return acc;
}

double sumabs_s(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(static_cast<double>(x[i]));
    return acc;
}

}  // namespace

const KernelTable scalar_table = {axpy_s, dot_s,  add_s,   sub_s,   mul_s,
                                  scale_s, sum_s, sumsq_s, sumabs_s, "scalar"};

}  // namespace rnsde::kern
