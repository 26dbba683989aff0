#pragma once

// Random fixtures for property tests. Generators draw from std::mt19937_64 so
// they never share a stream with the library under test.

#include <cstdint>
#include <random>
#include <vector>

#include "bartest/bar.hpp"
#include "bartest/error.hpp"
#include "bartest/tree.hpp"

namespace fixtures {

// Each daughter of an observed cell is observed with probability keep.
inline bartest::ObservationTree random_tree(int depth, double keep, std::mt19937_64& g) {
  std::bernoulli_distribution coin(keep);
  std::vector<std::uint8_t> delta(static_cast<std::size_t>(bartest::generation_end(depth)), 0);
  delta[1] = 1;
  for (std::int64_t k = 2; k < static_cast<std::int64_t>(delta.size()); ++k)
    delta[static_cast<std::size_t>(k)] = delta[static_cast<std::size_t>(k / 2)] && coin(g);
  return bartest::ObservationTree::from_delta(depth, std::move(delta));
}

// Values uniform on [lo, hi] on every cell, observed or not.
inline bartest::ValueTree random_values(int depth, double lo, double hi, std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(lo, hi);
  bartest::ValueTree v(depth);
  for (std::size_t k = 1; k < v.x.size(); ++k) v.x[k] = u(g);
  return v;
}

inline bool bar_estimable(const bartest::ValueTree& v, const bartest::ObservationTree& t) {
  try {
    (void)bartest::estimate_bar(v, t);
    return true;
  } catch (const bartest::Error&) {
    return false;
  }
}

// A random (tree, values) pair on which the BAR estimator is defined.
struct Fixture {
  bartest::ObservationTree tree;
  bartest::ValueTree values;
};

inline Fixture estimable_fixture(int depth, double keep, std::mt19937_64& g) {
  for (;;) {
    auto t = random_tree(depth, keep, g);
    auto v = random_values(depth, -3.0, 3.0, g);
    if (bar_estimable(v, t)) return {std::move(t), std::move(v)};
  }
}

}  // namespace fixtures
