#pragma once

#include <cstddef>
#include <string>

// Scalar reference kernels plus AVX2 variants chosen once at startup.
// All variants are equivalence-tested against the scalar path.
namespace rnsde::kern {

struct KernelTable {
    // y[i] += a * x[i]
    void (*axpy)(float a, const float* x, float* y, std::size_t n);
    // sum_i x[i] * y[i], accumulated in double
    double (*dot)(const float* x, const float* y, std::size_t n);
    // z[i] = x[i] + y[i] / z[i] = x[i] - y[i] / z[i] = x[i] * y[i]
    void (*add)(const float* x, const float* y, float* z, std::size_t n);
    void (*sub)(const float* x, const float* y, float* z, std::size_t n);
    void (*mul)(const float* x, const float* y, float* z, std::size_t n);
    // y[i] = a * x[i] + b
    void (*scale)(float a, float b, const float* x, float* y, std::size_t n);
    // sum_i x[i] (double accumulation)
    double (*sum)(const float* x, std::size_t n);
    double (*sumsq)(const float* x, std::size_t n);
    double (*sumabs)(const float* x, std::size_t n);
    const char* name;
};

extern const KernelTable scalar_table;
#if RNSDE_HAVE_AVX2
extern const KernelTable avx2_table;
#endif

// Active table (runtime CPU dispatch; overridable for tests).
const KernelTable& active();
void force(const KernelTable& t);
void reset_dispatch();
std::string active_name();

inline void axpy(float a, const float* x, float* y, std::size_t n) { active().axpy(a, x, y, n); }
inline double dot(const float* x, const float* y, std::size_t n) { return active().dot(x, y, n); }
inline void add(const float* x, const float* y, float* z, std::size_t n) { active().add(x, y, z, n); }
inline void sub(const float* x, const float* y, float* z, std::size_t n) { active().sub(x, y, z, n); }
inline void mul(const float* x, const float* y, float* z, std::size_t n) { active().mul(x, y, z, n); }
inline void scale(float a, float b, const float* x, float* y, std::size_t n) { active().scale(a, b, x, y, n); }
inline double sum(const float* x, std::size_t n) { return active().sum(x, n); }
inline double sumsq(const float* x, std::size_t n) { return active().sumsq(x, n); }
inline double sumabs(const float* x, std::size_t n) { return active().sumabs(x, n); }

}  // namespace rnsde::kern
