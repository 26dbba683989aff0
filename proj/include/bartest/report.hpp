#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bartest/error.hpp"

namespace bartest {

// Outcome of one of the three Wald tests.
struct TestReport {
  std::string test;  // "gw", "coeff" or "fixed"
  double statistic = 0.0;
  int df = 1;
  double p_value = 1.0;
  // |T*_{n-1}|, the sample size scaling the statistic.
  std::int64_t n_tstar = 0;
  std::vector<std::pair<std::string, double>> estimates;
  std::vector<std::string> warnings;

  double estimate(std::string_view name) const {
    for (const auto& [k, v] : estimates)
      if (k == name) return v;
    throw Error(ErrorCode::InvalidArgument, "no estimate named " + std::string(name));
  }
};

}  // namespace bartest
