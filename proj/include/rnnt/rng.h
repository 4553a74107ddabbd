// rnnt/rng.h
//
// Copyright (c)  2026  rnnt-fusion authors

#ifndef RNNT_RNG_H_
#define RNNT_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>

namespace rnnt {

// Deterministic random stream. All transforms are hand-rolled on top of
// std::mt19937_64 so that sampled values are identical across standard
// library implementations (std::*_distribution is not portable).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double Uniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection-free modulo is fine here; the bias
  // for desk-scale n (< 2^32) is below 2^-32 and the stream stays portable.
  int64_t UniformInt(int64_t n) {
    return static_cast<int64_t>(NextU64() % static_cast<uint64_t>(n));
  }

  // Standard normal via Box-Muller (polar form avoided to keep the draw
  // count per sample fixed).
  double Gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = Uniform();
    double u2 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Derives an independent child stream. Children with distinct tags are
  // decorrelated from each other and from the parent's future output.
  Rng Fork(uint64_t tag) {
    uint64_t s = NextU64();
    // splitmix64 finalizer over (s ^ tag)
    uint64_t z = s ^ (tag + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return Rng(z);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rnnt

#endif  // RNNT_RNG_H_
