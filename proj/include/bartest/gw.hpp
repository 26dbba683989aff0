#pragma once

// Two-type Galton-Watson model of the observation process: simulation,
// empirical reproduction probabilities, their asymptotic covariance and the
// Wald test comparing the mean offspring numbers of the two types.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bartest/error.hpp"
#include "bartest/numerics.hpp"
#include "bartest/random.hpp"
#include "bartest/report.hpp"
#include "bartest/tree.hpp"

namespace bartest {

// Offspring outcomes (j0, j1) are stored in the order
// (0,0), (1,0), (0,1), (1,1), i.e. at position j0 + 2*j1.
inline constexpr std::size_t outcome_slot(int j0, int j1) { return static_cast<std::size_t>(j0 + 2 * j1); }

struct ReproductionLaw {
  std::array<double, 4> p{};

  double operator()(int j0, int j1) const { return p[outcome_slot(j0, j1)]; }

  // Expected number of observed daughters of each type.
  double mean_type0() const { return p[1] + p[3]; }
  double mean_type1() const { return p[2] + p[3]; }
  double mean() const { return p[1] + p[2] + 2.0 * p[3]; }

  void validate() const {
    double s = 0.0;
    for (double v : p) {
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "reproduction probabilities must lie in [0, 1]");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw Error(ErrorCode::InvalidArgument, "reproduction probabilities must sum to 1");
  }

  bool operator==(const ReproductionLaw&) const = default;
};

struct GwModel {
  ReproductionLaw law0;  // type-0 (even) mothers
  ReproductionLaw law1;  // type-1 (odd) mothers

  const ReproductionLaw& law(int type) const { return type == 0 ? law0 : law1; }

  void validate() const {
    law0.validate();
    law1.validate();
  }

  // P(i, j): expected number of type-j daughters of a type-i mother.
  Mat2 descendants() const {
    Mat2 m;
    m(0, 0) = law0.mean_type0();
    m(0, 1) = law0.mean_type1();
    m(1, 0) = law1.mean_type0();
    m(1, 1) = law1.mean_type1();
    return m;
  }

  static GwModel symmetric(const ReproductionLaw& law) { return {law, law}; }
};

struct DominantEigen {
  double pi;
  std::array<double, 2> z;  // left eigenvector, z0 + z1 = 1
};

// Perron root and normalized left eigenvector of a positive 2x2 matrix.
inline DominantEigen dominant_eigen(const Mat2& P) {
  for (double v : P.a)
    if (!(v > 0.0)) throw Error(ErrorCode::NotPositive, "descendants matrix must have positive entries");
  const double p00 = P(0, 0), p01 = P(0, 1), p10 = P(1, 0), p11 = P(1, 1);
  const double disc = std::sqrt((p00 - p11) * (p00 - p11) + 4.0 * p01 * p10);
  const double pi = 0.5 * (p00 + p11 + disc);
  // z P = pi z  <=>  z1 p10 = (pi - p00) z0.
  const double w0 = p10;
  const double w1 = pi - p00;
  const double s = w0 + w1;
  return {pi, {w0 / s, w1 / s}};
}

inline bool satisfies_ao(const GwModel& model) {
  const Mat2 P = model.descendants();
  for (double v : P.a)
    if (!(v > 0.0)) return false;
  return dominant_eigen(P).pi > 1.0;
}

// Draws the presence indicators generation by generation. Each observed cell
// of type i picks one of the four outcomes with one uniform draw; unobserved
// cells consume no randomness.
inline ObservationTree simulate_observation_tree(const GwModel& model, int depth, Stream& rng) {
  model.validate();
  ObservationTree::check_depth(depth);
  std::vector<std::uint8_t> delta(static_cast<std::size_t>(generation_end(depth)), 0);
  delta[1] = 1;
  const std::int64_t mothers_end = generation_end(depth - 1);
  for (std::int64_t k = 1; k < mothers_end; ++k) {
    if (!delta[static_cast<std::size_t>(k)]) continue;
    const auto& law = model.law(static_cast<int>(k & 1));
    const double u = rng.uniform();
    std::size_t slot = 3;
    double acc = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
      acc += law.p[s];
      if (u < acc) {
        slot = s;
        break;
      }
    }
    // Guard against rounding in the cumulative sum picking an impossible outcome.
    while (law.p[slot] == 0.0 && slot > 0) --slot;
    delta[static_cast<std::size_t>(2 * k)] = static_cast<std::uint8_t>(slot & 1);
    delta[static_cast<std::size_t>(2 * k + 1)] = static_cast<std::uint8_t>(slot >> 1);
  }
  return ObservationTree::from_delta(depth, std::move(delta));
}

struct ReproductionEstimate {
  // (p^0(0,0), p^0(1,0), p^0(0,1), p^0(1,1), p^1(0,0), ..., p^1(1,1))
  std::array<double, 8> phat{};
  // Observed mothers of record of each type (denominators of phat).
  std::array<std::int64_t, 2> mother_counts{};
  std::array<double, 2> zhat{};
  // |T*_{n-1}|
  std::int64_t n_tstar = 0;

  ReproductionLaw law(int type) const {
    ReproductionLaw l;
    for (std::size_t s = 0; s < 4; ++s) l.p[s] = phat[4 * static_cast<std::size_t>(type) + s];
    return l;
  }
};

// Empirical reproduction probabilities from data up to generation n. The
// mothers of record are the cells 2k+i with k in T_{n-2}, i.e. every cell of
// generations 1..n-1; the root is not one of them.
inline ReproductionEstimate estimate_reproduction(const ObservationTree& tree) {
  const int n = tree.depth();
  if (n < 2) throw Error(ErrorCode::InsufficientData, "reproduction estimates need depth >= 2");
  std::array<std::array<std::int64_t, 4>, 2> hits{};
  ReproductionEstimate est;
  std::int64_t tstar = 1;
  const std::int64_t end = generation_end(n - 1);
  for (std::int64_t m = 2; m < end; ++m) {
    if (!tree.observed(m)) continue;
    ++tstar;
    const int type = static_cast<int>(m & 1);
    ++est.mother_counts[type];
    ++hits[type][outcome_slot(tree.observed(2 * m), tree.observed(2 * m + 1))];
  }
  for (int i = 0; i < 2; ++i) {
    const auto denom = est.mother_counts[i];
    for (std::size_t s = 0; s < 4; ++s)
      est.phat[4 * i + s] = denom > 0 ? static_cast<double>(hits[i][s]) / static_cast<double>(denom) : 0.0;
    est.zhat[i] = static_cast<double>(denom) / static_cast<double>(tstar);
  }
  est.n_tstar = tstar;
  return est;
}

// Plug-in estimate of the 8x8 limiting covariance of sqrt(|T*_{n-1}|)(phat - p):
// blockdiag(V^0 / z^0, V^1 / z^1) with V^i = diag(p^i) - p^i (p^i)^t.
inline Mat8 reproduction_covariance(const ReproductionEstimate& est) {
  for (int i = 0; i < 2; ++i)
    if (!(est.zhat[i] > 0.0))
      throw Error(ErrorCode::DegenerateTypeProportion,
                  "estimated proportion of type " + std::to_string(i) + " cells is zero", i);
  Mat8 v;
  for (std::size_t i = 0; i < 2; ++i) {
    const double inv_z = 1.0 / est.zhat[i];
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) {
        const double pr = est.phat[4 * i + r];
        const double pc = est.phat[4 * i + c];
        v(4 * i + r, 4 * i + c) = ((r == c ? pr : 0.0) - pr * pc) * inv_z;
      }
  }
  return v;
}

// Gradient of m(p) = mean(p^0) - mean(p^1).
inline constexpr std::array<double, 8> kGwGradient{0, 1, 1, 2, 0, -1, -1, -2};

inline constexpr double kVarianceFloor = 1e-14;

inline TestReport gw_mean_test(const ObservationTree& tree) {
  if (tree.depth() < 3) throw Error(ErrorCode::InsufficientData, "the GW test needs depth >= 3");
  const ReproductionEstimate est = estimate_reproduction(tree);
  for (int i = 0; i < 2; ++i)
    if (est.mother_counts[i] == 0)
      throw Error(ErrorCode::InsufficientData,
                  "no observed mother of type " + std::to_string(i), i);
  const Mat8 v = reproduction_covariance(est);
  const double mean0 = est.law(0).mean();
  const double mean1 = est.law(1).mean();
  const double m_hat = mean0 - mean1;
  const double delta = quadratic_form(v, kGwGradient);
  if (!(delta > kVarianceFloor))
    throw Error(ErrorCode::DegenerateVariance, "estimated variance of the mean difference is degenerate");

  TestReport r;
  r.test = "gw";
  r.df = 1;
  r.n_tstar = est.n_tstar;
  r.statistic = static_cast<double>(est.n_tstar) * m_hat * m_hat / delta;
  r.p_value = chi2_sf(r.statistic, 1);
  r.estimates = {{"m_hat", m_hat},
                 {"delta_gw", delta},
                 {"mean0", mean0},
                 {"mean1", mean1},
                 {"z0", est.zhat[0]},
                 {"z1", est.zhat[1]},
                 {"mothers0", static_cast<double>(est.mother_counts[0])},
                 {"mothers1", static_cast<double>(est.mother_counts[1])}};
  static constexpr const char* names[8] = {"p0_00", "p0_10", "p0_01", "p0_11",
                                           "p1_00", "p1_10", "p1_01", "p1_11"};
  for (std::size_t s = 0; s < 8; ++s) r.estimates.emplace_back(names[s], est.phat[s]);
  if (tree.extinct()) r.warnings.emplace_back("lineage went extinct before the last generation");
  return r;
}

}  // namespace bartest
