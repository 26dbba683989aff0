#pragma once

// Reproducible random streams.
//
// Generator identity (part of the reproducibility contract):
//   * engine: std::mt19937_64, seeded through std::seed_seq with the 32-bit
//     halves of (master_seed, tag_0, tag_1, ...). Both are fully specified by
//     the C++ standard, so a tuple yields the same sequence on every platform.
//   * uniform: top 53 bits of one engine output, scaled to [0, 1).
//   * normals: Box-Muller on two uniforms, producing an independent pair.
//
// A stream is owned by exactly one replica; streams for different tuples are
// derived independently, so replicas can run on any number of workers.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "bartest/error.hpp"

namespace bartest {

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : Stream(seed, {}) {}

  Stream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> tags) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * (tags.size() + 1));
    auto push = [&](std::uint64_t v) {
      words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(master_seed);
    for (auto t : tags) push(t);
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Two independent standard normals.
  std::pair<double, double> normal_pair() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(angle), r * std::sin(angle)};
  }

 private:
  std::mt19937_64 engine_;
};

// Centred pair with covariance [[sigma2, rho], [rho, sigma2]].
// sigma2 == 0 (with rho == 0) is accepted and yields (0, 0) without drawing.
inline std::pair<double, double> gaussian_pair(double sigma2, double rho, Stream& rng) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2) || !std::isfinite(rho))
    throw Error(ErrorCode::InvalidArgument, "gaussian_pair: sigma2 must be finite and >= 0");
  if (std::abs(rho) > sigma2)
    throw Error(ErrorCode::InvalidArgument, "gaussian_pair: |rho| must not exceed sigma2");
  if (sigma2 == 0.0) return {0.0, 0.0};
  const auto [g1, g2] = rng.normal_pair();
  const double r = rho / sigma2;  // correlation
  const double e0 = std::sqrt(sigma2) * g1;
  const double e1 = r * e0 + std::sqrt(sigma2 * (1.0 - r * r)) * g2;
  return {e0, e1};
}

}  // namespace bartest
