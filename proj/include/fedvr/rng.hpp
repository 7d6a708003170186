#pragma once

#include <cmath>
#include <cstdint>

#include "fedvr/errors.hpp"

namespace fedvr {

// Deterministic generator with a hand-rolled distribution layer. The standard
// <random> distributions are implementation-defined, so every draw here is
// spelled out to keep streams bit-stable across compilers and platforms.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // splitmix64: one additive step plus a finalizer. Passes BigCrush-scale
  // statistical batteries and never repeats state within 2^64 draws.
  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) from the top 53 bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); rejection keeps every value equally likely.
  std::uint64_t next_below(std::uint64_t n) {
    require(n > 0, Errc::invalid_argument, "next_below needs n > 0");
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller. Two uniforms per draw and no cached spare,
  // so the stream position never depends on call parity.
  double next_gauss() {
    double u1 = next_unit();
    const double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;  // log(0) guard; remaps one lattice point
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Gamma(shape, 1) by the Marsaglia-Tsang squeeze; shape < 1 is boosted
  // through the Gamma(shape+1) * U^(1/shape) identity.
  double next_gamma(double shape) {
    require(shape > 0.0 && std::isfinite(shape), Errc::invalid_argument,
            "gamma shape must be positive and finite");
    if (shape < 1.0) {
      double u = next_unit();
      if (u <= 0.0) u = 0x1.0p-53;
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double x = next_gauss();
      const double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      const double v = t * t * t;
      double u = next_unit();
      if (u <= 0.0) u = 0x1.0p-53;
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

private:
  std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds (seed, a, b, c) into a fresh stream seed. Every subsystem and every
// (round, client) pair gets its own stream derived this way, so participation
// order, worker count, and evaluation cadence cannot shift anyone's draws.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                   std::uint64_t c = 0) {
  std::uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ULL);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  return h;
}

namespace stream_tag {
inline constexpr std::uint64_t init_params = 0xA1;
inline constexpr std::uint64_t participants = 0xA2;
inline constexpr std::uint64_t client = 0xA3;
inline constexpr std::uint64_t partition = 0xA4;
inline constexpr std::uint64_t synthetic = 0xA5;
inline constexpr std::uint64_t probe = 0xA6;
}  // namespace stream_tag

}  // namespace fedvr
