#pragma once

// Small dense linear algebra and the special functions needed by the Wald
// tests: erfc and the chi-square survival function for one and two degrees
// of freedom.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "bartest/error.hpp"

namespace bartest {

// Row-major N x N matrix with value semantics.
template <std::size_t N>
struct SmallMatrix {
  std::array<double, N * N> a{};

  static constexpr std::size_t size() { return N; }

  double& operator()(std::size_t i, std::size_t j) { return a[i * N + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * N + j]; }

  static SmallMatrix identity() {
    SmallMatrix m;
    for (std::size_t i = 0; i < N; ++i) m(i, i) = 1.0;
    return m;
  }

  SmallMatrix transpose() const {
    SmallMatrix t;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  SmallMatrix& operator+=(const SmallMatrix& o) {
    for (std::size_t i = 0; i < N * N; ++i) a[i] += o.a[i];
    return *this;
  }
  SmallMatrix& operator*=(double s) {
    for (auto& v : a) v *= s;
    return *this;
  }

  friend SmallMatrix operator+(SmallMatrix l, const SmallMatrix& r) { return l += r; }
  friend SmallMatrix operator*(SmallMatrix m, double s) { return m *= s; }
  friend SmallMatrix operator*(double s, SmallMatrix m) { return m *= s; }

  friend SmallMatrix operator*(const SmallMatrix& l, const SmallMatrix& r) {
    SmallMatrix out;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t k = 0; k < N; ++k) {
        const double lik = l(i, k);
        for (std::size_t j = 0; j < N; ++j) out(i, j) += lik * r(k, j);
      }
    return out;
  }

  friend std::array<double, N> operator*(const SmallMatrix& m, const std::array<double, N>& v) {
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) out[i] += m(i, j) * v[j];
    return out;
  }

  bool operator==(const SmallMatrix&) const = default;
};

using Mat2 = SmallMatrix<2>;
using Mat4 = SmallMatrix<4>;
using Mat8 = SmallMatrix<8>;

template <std::size_t N>
double max_abs_diff(const SmallMatrix<N>& l, const SmallMatrix<N>& r) {
  double d = 0.0;
  for (std::size_t i = 0; i < N * N; ++i) d = std::max(d, std::abs(l.a[i] - r.a[i]));
  return d;
}

template <std::size_t N>
double norm1(const SmallMatrix<N>& m) {
  double best = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < N; ++i) col += std::abs(m(i, j));
    best = std::max(best, col);
  }
  return best;
}

template <std::size_t N>
double quadratic_form(const SmallMatrix<N>& m, const std::array<double, N>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) s += v[i] * m(i, j) * v[j];
  return s;
}

// Pre/post multiplication by a tall matrix: returns G^t M G for G of shape N x K.
template <std::size_t N, std::size_t K>
SmallMatrix<K> congruence(const SmallMatrix<N>& m, const std::array<std::array<double, K>, N>& g) {
  SmallMatrix<K> out;
  for (std::size_t p = 0; p < K; ++p)
    for (std::size_t q = 0; q < K; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) s += g[i][p] * m(i, j) * g[j][q];
      out(p, q) = s;
    }
  return out;
}

inline constexpr double kMaxCondition = 1e12;

namespace detail {

template <std::size_t N>
SmallMatrix<N> gauss_jordan(SmallMatrix<N> m, bool& ok) {
  SmallMatrix<N> inv = SmallMatrix<N>::identity();
  const double scale = std::max(norm1(m), 1e-300);
  ok = true;
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < N; ++r)
      if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
    if (std::abs(m(piv, col)) <= scale * 1e-300) {
      ok = false;
      return inv;
    }
    if (piv != col)
      for (std::size_t j = 0; j < N; ++j) {
        std::swap(m(piv, j), m(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    const double d = m(col, col);
    for (std::size_t j = 0; j < N; ++j) {
      m(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t r = 0; r < N; ++r) {
      if (r == col) continue;
      const double f = m(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < N; ++j) {
        m(r, j) -= f * m(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

template <std::size_t N>
SmallMatrix<N> try_invert(const SmallMatrix<N>& m, bool& ok) {
  if constexpr (N == 2) {
    SmallMatrix<N> inv;
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    ok = det != 0.0 && std::isfinite(det);
    if (ok) {
      inv(0, 0) = m(1, 1) / det;
      inv(0, 1) = -m(0, 1) / det;
      inv(1, 0) = -m(1, 0) / det;
      inv(1, 1) = m(0, 0) / det;
    }
    return inv;
  } else {
    return gauss_jordan(m, ok);
  }
}

}  // namespace detail

// 1-norm condition number ||m|| * ||m^-1||; +inf when m is exactly singular.
template <std::size_t N>
double condition_estimate(const SmallMatrix<N>& m) {
  bool ok = false;
  const SmallMatrix<N> inv = detail::try_invert(m, ok);
  return ok ? norm1(m) * norm1(inv) : INFINITY;
}

// Inverse of a small matrix. 2x2 uses the adjugate, larger sizes Gauss-Jordan
// elimination with partial pivoting. Throws Singular (detail = condition
// estimate, saturated) when the condition exceeds max_condition.
template <std::size_t N>
SmallMatrix<N> invert(const SmallMatrix<N>& m, double max_condition = kMaxCondition) {
  bool ok = false;
  const SmallMatrix<N> inv = detail::try_invert(m, ok);
  const double cond = ok ? norm1(m) * norm1(inv) : INFINITY;
  if (!ok || !(cond <= max_condition)) {
    const double sat = std::isfinite(cond) ? std::min(cond, 9.0e18) : 9.0e18;
    throw Error(ErrorCode::Singular,
                "matrix is singular or ill-conditioned (condition estimate " +
                    std::to_string(cond) + ")",
                static_cast<std::int64_t>(sat));
  }
  return inv;
}

// Complementary error function. |x| < 2.5 uses the Maclaurin series of erf,
// larger arguments the Laplace continued fraction evaluated with the modified
// Lentz method. Absolute error is below 1e-14 on the real line.
inline double erfc(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) return 2.0 - erfc(-x);
  if (x < 2.5) {
    // erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
    const double x2 = x * x;
    double term = x;  // (-1)^n x^(2n+1) / n!
    double sum = x;
    for (int n = 1; n < 200; ++n) {
      term *= -x2 / n;
      const double add = term / (2 * n + 1);
      sum += add;
      if (std::abs(add) < 1e-17 * std::abs(sum)) break;
    }
    return 1.0 - 2.0 / std::sqrt(std::numbers::pi) * sum;
  }
  if (x > 27.0) return 0.0;
  // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 500; ++k) {
    const double ak = 0.5 * k;
    d = x + ak * d;
    if (d == 0.0) d = tiny;
    c = x + ak / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x * x) / std::sqrt(std::numbers::pi) / f;
}

// Upper tail of the chi-square law with one or two degrees of freedom.
inline double chi2_sf(double x, int df) {
  if (!(x >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "chi2_sf requires a nonnegative argument");
  switch (df) {
    case 1: return erfc(std::sqrt(x / 2.0));
    case 2: return std::exp(-x / 2.0);
    default:
      throw Error(ErrorCode::InvalidArgument,
                  "chi2_sf supports df 1 and 2 only, got " + std::to_string(df));
  }
}

}  // namespace bartest
