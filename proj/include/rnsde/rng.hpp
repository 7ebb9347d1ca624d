#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rnsde {

// mt19937_64 with an explicit Box-Muller normal so streams are
// bit-reproducible across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

    double uniform() {
        // (0,1]; avoids log(0) in Box-Muller
        return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t next_u64() { return gen_(); }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }

    // derive an independent stream
    Rng fork(std::uint64_t salt) {
        return Rng(gen_() ^ (salt * 0x9e3779b97f4a7c15ull));
    }

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rnsde
