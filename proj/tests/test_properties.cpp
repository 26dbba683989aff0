// Invariants checked over randomly generated lineages.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bartest/bar.hpp"
#include "bartest/gw.hpp"
#include "bartest/mc.hpp"
#include "support/fixtures.hpp"

using namespace bartest;

namespace {

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

// Simulated lineage from the null design; the GW law varies with `rep` so
// that both types get distinct offspring distributions.
fixtures::Fixture simulated(int rep, int depth) {
  std::mt19937_64 g(static_cast<std::uint64_t>(rep) * 7919u + 1u);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    auto law = [&] {
      ReproductionLaw l{{0.05 * u(g), 0.1 + 0.2 * u(g), 0.1 + 0.2 * u(g), 0.0}};
      l.p[3] = 1.0 - l.p[0] - l.p[1] - l.p[2];
      return l;
    };
    const GwModel model{law(), law()};
    const BarModel bar{u(g), 0.9 * u(g) - 0.45, u(g), 0.9 * u(g) - 0.45, 0.2 + u(g), 0.1 * u(g)};
    Stream rng(static_cast<std::uint64_t>(rep), {99});
    auto tree = simulate_observation_tree(model, depth, rng);
    auto values = simulate_bar_values(bar, depth, u(g), rng);
    if (!tree.extinct() && fixtures::bar_estimable(values, tree)) return {std::move(tree), std::move(values)};
  }
}

template <std::size_t N>
void expect_psd(const SmallMatrix<N>& m, std::mt19937_64& g, double tol) {
  std::normal_distribution<double> n01;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) ASSERT_EQ(m(i, j), m(j, i));
  for (int t = 0; t < 50; ++t) {
    std::array<double, N> v{};
    for (auto& x : v) x = n01(g);
    ASSERT_GE(quadratic_form(m, v), -tol * norm1(m));
  }
}

}  // namespace

TEST(GwProperty, BlocksSumToOne) {
  std::mt19937_64 g(1);
  for (int rep = 0; rep < 300; ++rep) {
    const auto t = fixtures::random_tree(2 + rep % 8, 0.75, g);
    const auto e = estimate_reproduction(t);
    for (int i = 0; i < 2; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        const double p = e.phat[4 * i + k];
        ASSERT_GE(p, 0.0);
        ASSERT_LE(p, 1.0);
        s += p;
      }
      if (e.mother_counts[i] > 0) ASSERT_NEAR(s, 1.0, 1e-12);
      else ASSERT_EQ(s, 0.0);
      ASSERT_GE(e.zhat[i], 0.0);
    }
  }
}

TEST(GwProperty, CovarianceRowsSumToZeroAndPsd) {
  std::mt19937_64 g(2);
  for (int rep = 0; rep < 200; ++rep) {
    const auto f = simulated(rep, 3 + rep % 7);
    const auto e = estimate_reproduction(f.tree);
    if (e.mother_counts[0] == 0 || e.mother_counts[1] == 0) continue;
    const Mat8 v = reproduction_covariance(e);
    for (std::size_t r = 0; r < 8; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 8; ++c) s += v(r, c);
      ASSERT_NEAR(s, 0.0, 1e-12);
    }
    expect_psd(v, g, 1e-12);
  }
}

TEST(GwProperty, ReflectionNegatesMeanDifference) {
  int checked = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const auto f = simulated(rep, 4 + rep % 7);
    TestReport a, b;
    try {
      a = gw_mean_test(f.tree);
    } catch (const Error&) {
      continue;
    }
    b = gw_mean_test(f.tree.reflected());
    ASSERT_LE(rel_diff(a.estimate("m_hat"), -b.estimate("m_hat")), 1e-10);
    ASSERT_LE(rel_diff(a.statistic, b.statistic), 1e-10);
    ASSERT_GE(a.statistic, 0.0);
    ++checked;
  }
  EXPECT_GT(checked, 250);
}

TEST(BarProperty, ReflectionLeavesStatisticsUnchanged) {
  for (int rep = 0; rep < 200; ++rep) {
    const auto f = simulated(rep, 4 + rep % 7);
    const auto e = estimate_bar(f.values, f.tree);
    const auto r = estimate_bar(f.values.reflected(), f.tree.reflected());
    EXPECT_LE(rel_diff(e.theta[0], r.theta[2]), 1e-10);
    EXPECT_LE(rel_diff(e.theta[1], r.theta[3]), 1e-10);
    EXPECT_LE(rel_diff(e.sigma2_hat, r.sigma2_hat), 1e-10);
    EXPECT_LE(rel_diff(e.rho_hat, r.rho_hat), 1e-10);
    try {
      const auto c = coefficient_test(e);
      EXPECT_LE(rel_diff(c.statistic, coefficient_test(r).statistic), 1e-10) << rep;
      EXPECT_GE(c.statistic, 0.0);
    } catch (const Error& err) {
      ASSERT_TRUE(is_statistical(err.code()));
    }
    try {
      const auto fp = fixed_point_test(e);
      EXPECT_LE(rel_diff(fp.statistic, fixed_point_test(r).statistic), 1e-10) << rep;
      EXPECT_GE(fp.statistic, 0.0);
    } catch (const Error& err) {
      ASSERT_TRUE(is_statistical(err.code()));
    }
  }
}

TEST(BarProperty, LocationEquivariance) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    const auto f = simulated(rep, 5 + rep % 6);
    const double mu = shift(g);
    const auto e = estimate_bar(f.values, f.tree);
    const auto s = estimate_bar(f.values.shifted(mu), f.tree);
    const auto [a, b, c, d] = e.theta;
    EXPECT_NEAR(s.theta[0], a + mu * (1 - b), 1e-9);
    EXPECT_NEAR(s.theta[1], b, 1e-9);
    EXPECT_NEAR(s.theta[2], c + mu * (1 - d), 1e-9);
    EXPECT_NEAR(s.theta[3], d, 1e-9);
    EXPECT_NEAR(s.sigma2_hat, e.sigma2_hat, 1e-9);
    const auto fe = fixed_point_test(e), fs = fixed_point_test(s);
    EXPECT_NEAR(fs.estimate("fixed_point0"), fe.estimate("fixed_point0") + mu, 1e-9);
    EXPECT_NEAR(fs.estimate("fixed_point1"), fe.estimate("fixed_point1") + mu, 1e-9);
    EXPECT_NEAR(fs.estimate("diff"), fe.estimate("diff"), 1e-9);
  }
}

TEST(BarProperty, CovarianceSymmetricWithNonnegativeDiagonal) {
  std::mt19937_64 g(4);
  int psd_checked = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto f = simulated(rep, 3 + rep % 8);
    const auto e = estimate_bar(f.values, f.tree);
    for (std::size_t i = 0; i < 4; ++i) {
      ASSERT_GE(e.cov(i, i), 0.0);
      for (std::size_t j = 0; j < 4; ++j) ASSERT_EQ(e.cov(i, j), e.cov(j, i));
    }
    // Every mother adds v v' (x) [[s2 d0, rho d01], [rho d01, s2 d1]], so the
    // sandwich is PSD whenever the fitted noise covariance is.
    if (std::abs(e.rho_hat) <= e.sigma2_hat) {
      expect_psd(e.cov, g, 1e-10);
      ++psd_checked;
    }
  }
  EXPECT_GT(psd_checked, 180);
}

TEST(BarProperty, SmallTreesCanGiveIndefiniteNoiseFit) {
  // sigma2 averages over every observed daughter and rho over sister pairs
  // only, so on a few cells |rho| > sigma2 is possible.
  ValueTree v(2);
  v[1] = 0.0;
  v[2] = 1.0;
  v[3] = 1.0;
  v[4] = 0.0;
  v[5] = 0.0;
  v[6] = 0.0;
  const auto tree = validate(2, {1, 2, 3, 4, 6});
  const auto n = residual_noise_estimates(v, tree, {0.0, 0.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(n.sigma2, 2.0 / 5.0);  // five observed cells, root included
  EXPECT_DOUBLE_EQ(n.rho, 1.0);
}

TEST(BarProperty, ZeroNoiseExactRecovery) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  while (checked < 300) {
    BarModel m{3 * u(g), 0.95 * u(g), 3 * u(g), 0.95 * u(g), 0.0, 0.0};
    if (!m.is_stable()) continue;
    const int depth = 2 + static_cast<int>(g() % 9);
    const auto tree = fixtures::random_tree(depth, 0.8, g);
    Stream rng(g());
    const auto values = simulate_bar_values(m, depth, 5 * u(g), rng);
    const auto s = sufficient_stats(values, tree);
    // Needs two distinct observed mother values per type.
    if (s.daughters[0] < 2 || s.daughters[1] < 2) continue;
    Theta th;
    try {
      th = ls_estimate(s);
    } catch (const Error&) {
      continue;  // mothers of one type share a value
    }
    EXPECT_NEAR(th[0], m.a, 1e-10);
    EXPECT_NEAR(th[1], m.b, 1e-10);
    EXPECT_NEAR(th[2], m.c, 1e-10);
    EXPECT_NEAR(th[3], m.d, 1e-10);
    ++checked;
  }
}

TEST(McProperty, ThresholdMonotoneOnRandomConfigs) {
  std::mt19937_64 g(6);
  for (int rep = 0; rep < 6; ++rep) {
    McConfig c = McConfig::table_preset(1 + rep % 3);
    c.replicas = 80;
    c.generations = {4, 6};
    c.master_seed = g();
    c.thresholds = {0.2, 0.001, 0.05, 0.1, 0.01};
    const McTable t = run_table(c, 2);
    for (int gen : c.generations)
      for (Hypothesis h : {Hypothesis::H0, Hypothesis::H1}) {
        double prev = -1.0;
        for (double th : {0.001, 0.01, 0.05, 0.1, 0.2}) {
          const double p = t.cell(gen, h, th).proportion();
          ASSERT_GE(p, prev);
          prev = p;
        }
      }
  }
}
