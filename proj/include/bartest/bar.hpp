#pragma once

// First-order asymmetric bifurcating autoregression observed through a
// Galton-Watson presence process:
//
//   X_2k   = a + b X_k + e_2k
//   X_2k+1 = c + d X_k + e_2k+1
//
// Least-squares estimation, residual noise moments, the sandwich covariance
// of the estimator, and the Wald tests comparing (a, b) with (c, d) and the
// two fixed points a/(1-b), c/(1-d).

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bartest/error.hpp"
#include "bartest/gw.hpp"
#include "bartest/numerics.hpp"
#include "bartest/random.hpp"
#include "bartest/report.hpp"
#include "bartest/tree.hpp"

namespace bartest {

struct BarModel {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double sigma2 = 1.0;
  double rho = 0.0;

  double fixed_point_even() const { return a / (1.0 - b); }
  double fixed_point_odd() const { return c / (1.0 - d); }

  // 0 < max(|b|, |d|) < 1, the stability condition of the asymptotic theory.
  bool is_stable() const {
    const double m = std::max(std::abs(b), std::abs(d));
    return m > 0.0 && m < 1.0;
  }

  // What the simulator needs: finite values, |b|, |d| < 1, sigma2 >= 0 and a
  // positive semidefinite sister covariance. sigma2 = 0 and b = d = 0 are
  // admitted so that degenerate fixtures can be generated.
  void validate() const {
    for (double v : {a, b, c, d, sigma2, rho})
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "BAR parameters must be finite");
    if (!(std::max(std::abs(b), std::abs(d)) < 1.0))
      throw Error(ErrorCode::InvalidArgument, "BAR model requires max(|b|, |d|) < 1");
    if (sigma2 < 0.0) throw Error(ErrorCode::InvalidArgument, "BAR model requires sigma2 >= 0");
    if (std::abs(rho) > sigma2)
      throw Error(ErrorCode::InvalidArgument, "BAR model requires |rho| <= sigma2");
  }
};

// Characteristic X_k of every cell of a depth-n tree, indexed by label
// (entry 0 unused). Cells that were not observed carry a placeholder that
// estimators never read.
struct ValueTree {
  int depth = 0;
  std::vector<double> x;

  ValueTree() = default;
  explicit ValueTree(int depth_) : depth(depth_), x(static_cast<std::size_t>(generation_end(depth_)), 0.0) {
    ObservationTree::check_depth(depth_);
  }

  double operator[](std::int64_t k) const { return x[static_cast<std::size_t>(k)]; }
  double& operator[](std::int64_t k) { return x[static_cast<std::size_t>(k)]; }

  ValueTree reflected() const {
    ValueTree t(depth);
    for (std::int64_t k = 1; k < static_cast<std::int64_t>(x.size()); ++k) t[reflect_index(k)] = (*this)[k];
    return t;
  }

  ValueTree shifted(double mu) const {
    ValueTree t = *this;
    for (std::size_t k = 1; k < t.x.size(); ++k) t.x[k] += mu;
    return t;
  }

  bool operator==(const ValueTree&) const = default;
};

// Values on the full tree: X_1 = x1, then one correlated noise pair per
// mother in label order. Observation is applied afterwards through delta.
inline ValueTree simulate_bar_values(const BarModel& model, int depth, double x1, Stream& rng) {
  model.validate();
  if (!std::isfinite(x1)) throw Error(ErrorCode::InvalidArgument, "initial value must be finite");
  ValueTree v(depth);
  v[1] = x1;
  const std::int64_t mothers_end = generation_end(depth - 1);
  for (std::int64_t k = 1; k < mothers_end; ++k) {
    const auto [e0, e1] = gaussian_pair(model.sigma2, model.rho, rng);
    v[2 * k] = model.a + model.b * v[k] + e0;
    v[2 * k + 1] = model.c + model.d * v[k] + e1;
  }
  return v;
}

struct SufficientStats {
  Mat2 s0;   // sum over k in T_{n-1} of delta_2k   [[1, X_k], [X_k, X_k^2]]
  Mat2 s1;   // same with delta_2k+1
  Mat2 s01;  // same with delta_2k delta_2k+1
  // (sum delta_2k X_2k, sum delta_2k X_k X_2k, sum delta_2k+1 X_2k+1, sum delta_2k+1 X_k X_2k+1)
  std::array<double, 4> rhs{};
  std::int64_t n_tstar_prev = 0;  // |T*_{n-1}|
  std::int64_t n_pairs = 0;       // |T*01_{n-1}|
  std::int64_t n_tstar = 0;       // |T*_n|
  std::array<std::int64_t, 2> daughters{};  // observed daughters of each type
};

inline void check_same_depth(const ValueTree& x, const ObservationTree& tree) {
  if (x.depth != tree.depth() || x.x.size() != static_cast<std::size_t>(tree.label_end()))
    throw Error(ErrorCode::InvalidArgument, "value tree and observation tree differ in depth");
}

inline SufficientStats sufficient_stats(const ValueTree& x, const ObservationTree& tree) {
  check_same_depth(x, tree);
  SufficientStats s;
  s.n_tstar = 1;
  s.n_tstar_prev = 0;
  const std::int64_t mothers_end = generation_end(tree.depth() - 1);
  for (std::int64_t k = 1; k < mothers_end; ++k) {
    if (!tree.observed(k)) continue;
    ++s.n_tstar_prev;
    const bool d0 = tree.observed(2 * k);
    const bool d1 = tree.observed(2 * k + 1);
    if (!d0 && !d1) continue;
    const double xk = x[k];
    Mat2 outer;
    outer(0, 0) = 1.0;
    outer(0, 1) = outer(1, 0) = xk;
    outer(1, 1) = xk * xk;
    if (d0) {
      s.s0 += outer;
      s.rhs[0] += x[2 * k];
      s.rhs[1] += xk * x[2 * k];
      ++s.daughters[0];
    }
    if (d1) {
      s.s1 += outer;
      s.rhs[2] += x[2 * k + 1];
      s.rhs[3] += xk * x[2 * k + 1];
      ++s.daughters[1];
    }
    if (d0 && d1) {
      s.s01 += outer;
      ++s.n_pairs;
    }
  }
  s.n_tstar = 1 + s.daughters[0] + s.daughters[1];
  return s;
}

// (a, b, c, d)
using Theta = std::array<double, 4>;

namespace detail {

inline Mat2 invert_design(const Mat2& s, std::int64_t observations, int type) {
  if (observations < 2)
    throw Error(ErrorCode::SingularDesign,
                "fewer than two observed daughters of type " + std::to_string(type), type);
  try {
    return invert(s);
  } catch (const Error&) {
    throw Error(ErrorCode::SingularDesign,
                "design matrix of type " + std::to_string(type) + " is numerically singular", type);
  }
}

}  // namespace detail

inline Theta ls_estimate(const SufficientStats& s) {
  const Mat2 inv0 = detail::invert_design(s.s0, s.daughters[0], 0);
  const Mat2 inv1 = detail::invert_design(s.s1, s.daughters[1], 1);
  const auto ab = inv0 * std::array<double, 2>{s.rhs[0], s.rhs[1]};
  const auto cd = inv1 * std::array<double, 2>{s.rhs[2], s.rhs[3]};
  return {ab[0], ab[1], cd[0], cd[1]};
}

struct NoiseEstimate {
  double sigma2 = 0.0;
  double rho = 0.0;
  // Set when no mother has both daughters observed; rho is then reported as 0.
  bool no_sister_pairs = false;
};

inline NoiseEstimate residual_noise_estimates(const ValueTree& x, const ObservationTree& tree, const Theta& theta) {
  check_same_depth(x, tree);
  for (double v : theta)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "parameter estimates must be finite");
  double sum_sq = 0.0;
  double sum_cross = 0.0;
  std::int64_t tstar = 1;
  std::int64_t pairs = 0;
  const std::int64_t mothers_end = generation_end(tree.depth() - 1);
  for (std::int64_t k = 1; k < mothers_end; ++k) {
    if (!tree.observed(k)) continue;
    const bool d0 = tree.observed(2 * k);
    const bool d1 = tree.observed(2 * k + 1);
    const double r0 = d0 ? x[2 * k] - theta[0] - theta[1] * x[k] : 0.0;
    const double r1 = d1 ? x[2 * k + 1] - theta[2] - theta[3] * x[k] : 0.0;
    sum_sq += r0 * r0 + r1 * r1;
    tstar += d0 + d1;
    if (d0 && d1) {
      sum_cross += r0 * r1;
      ++pairs;
    }
  }
  NoiseEstimate out;
  out.sigma2 = sum_sq / static_cast<double>(tstar);
  if (pairs == 0) {
    out.no_sister_pairs = true;
    out.rho = 0.0;
  } else {
    out.rho = sum_cross / static_cast<double>(pairs);
  }
  return out;
}

// C = |T*_{n-1}| Sigma^-1 [[s2 S0, r S01], [r S01, s2 S1]] Sigma^-1 with
// Sigma = blockdiag(S0, S1): the estimated covariance of the limit law of
// sqrt(|T*_{n-1}|)(theta_hat - theta).
inline Mat4 asymptotic_covariance(const SufficientStats& s, double sigma2_hat, double rho_hat) {
  const Mat2 inv0 = detail::invert_design(s.s0, s.daughters[0], 0);
  const Mat2 inv1 = detail::invert_design(s.s1, s.daughters[1], 1);
  Mat4 sigma_inv;
  Mat4 gamma;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      sigma_inv(i, j) = inv0(i, j);
      sigma_inv(2 + i, 2 + j) = inv1(i, j);
      gamma(i, j) = sigma2_hat * s.s0(i, j);
      gamma(2 + i, 2 + j) = sigma2_hat * s.s1(i, j);
      gamma(i, 2 + j) = rho_hat * s.s01(i, j);
      gamma(2 + i, j) = rho_hat * s.s01(i, j);
    }
  Mat4 c = sigma_inv * gamma * sigma_inv;
  c *= static_cast<double>(s.n_tstar_prev);
  // Symmetrize away rounding asymmetry from the triple product.
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) c(i, j) = c(j, i) = 0.5 * (c(i, j) + c(j, i));
  return c;
}

struct BarEstimate {
  Theta theta{};
  double sigma2_hat = 0.0;
  double rho_hat = 0.0;
  bool no_sister_pairs = false;
  Mat4 cov;
  SufficientStats stats;
};

inline BarEstimate estimate_bar(const ValueTree& x, const ObservationTree& tree) {
  if (tree.depth() < 2) throw Error(ErrorCode::InsufficientData, "BAR estimation needs depth >= 2");
  BarEstimate e;
  e.stats = sufficient_stats(x, tree);
  e.theta = ls_estimate(e.stats);
  const NoiseEstimate noise = residual_noise_estimates(x, tree, e.theta);
  e.sigma2_hat = noise.sigma2;
  e.rho_hat = noise.rho;
  e.no_sister_pairs = noise.no_sister_pairs;
  e.cov = asymptotic_covariance(e.stats, e.sigma2_hat, e.rho_hat);
  return e;
}

namespace detail {

inline void add_bar_estimates(TestReport& r, const BarEstimate& e) {
  r.estimates.insert(r.estimates.end(), {{"a", e.theta[0]},
                                         {"b", e.theta[1]},
                                         {"c", e.theta[2]},
                                         {"d", e.theta[3]},
                                         {"sigma2", e.sigma2_hat},
                                         {"rho", e.rho_hat},
                                         {"n_pairs", static_cast<double>(e.stats.n_pairs)},
                                         {"n_observed", static_cast<double>(e.stats.n_tstar)}});
  if (e.no_sister_pairs) r.warnings.emplace_back("no sister pairs observed; rho estimate set to 0");
}

}  // namespace detail

// Gradient of g(a, b, c, d) = (a - c, b - d), stored as a 4x2 matrix.
inline constexpr std::array<std::array<double, 2>, 4> kCoefficientGradient{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};

inline TestReport coefficient_test(const BarEstimate& e) {
  const Mat2 delta = congruence(e.cov, kCoefficientGradient);
  const bool positive = delta(0, 0) > 0.0 && delta(0, 0) * delta(1, 1) - delta(0, 1) * delta(1, 0) > 0.0;
  if (!positive || !(condition_estimate(delta) <= kMaxCondition))
    throw Error(ErrorCode::DegenerateVariance, "covariance of (a-c, b-d) is not positive definite");
  const Mat2 delta_inv = invert(delta);
  const std::array<double, 2> diff{e.theta[0] - e.theta[2], e.theta[1] - e.theta[3]};

  TestReport r;
  r.test = "coeff";
  r.df = 2;
  r.n_tstar = e.stats.n_tstar_prev;
  r.statistic = std::max(0.0, static_cast<double>(r.n_tstar) * quadratic_form(delta_inv, diff));
  r.p_value = chi2_sf(r.statistic, 2);
  r.estimates = {{"diff_a_c", diff[0]}, {"diff_b_d", diff[1]}};
  detail::add_bar_estimates(r, e);
  return r;
}

inline constexpr double kUnitRootGuard = 1e-8;

inline TestReport fixed_point_test(const BarEstimate& e) {
  const auto [a, b, c, d] = e.theta;
  if (!(std::abs(1.0 - b) > kUnitRootGuard) || !(std::abs(1.0 - d) > kUnitRootGuard))
    throw Error(ErrorCode::NearUnitRoot, "estimated autoregressive coefficient too close to 1");
  const double fp0 = a / (1.0 - b);
  const double fp1 = c / (1.0 - d);
  const double diff = fp0 - fp1;
  // Gradient of g(a, b, c, d) = a/(1-b) - c/(1-d) at the estimates.
  const std::array<double, 4> grad{1.0 / (1.0 - b), a / ((1.0 - b) * (1.0 - b)), -1.0 / (1.0 - d),
                                   -c / ((1.0 - d) * (1.0 - d))};
  const double delta = quadratic_form(e.cov, grad);
  if (!(delta > kVarianceFloor))
    throw Error(ErrorCode::DegenerateVariance, "variance of the fixed-point difference is degenerate");

  TestReport r;
  r.test = "fixed";
  r.df = 1;
  r.n_tstar = e.stats.n_tstar_prev;
  r.statistic = static_cast<double>(r.n_tstar) * diff * diff / delta;
  r.p_value = chi2_sf(r.statistic, 1);
  r.estimates = {{"fixed_point0", fp0}, {"fixed_point1", fp1}, {"diff", diff}, {"delta_f", delta}};
  detail::add_bar_estimates(r, e);
  return r;
}

}  // namespace bartest
