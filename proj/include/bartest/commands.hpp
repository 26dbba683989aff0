#pragma once

// Implementation of the command-line subcommands, kept free of argument
// parsing so tests can drive them directly. Exit codes: 0 success, 1 usage,
// parse or I/O error, 2 statistically degenerate or insufficient data.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bartest/bar.hpp"
#include "bartest/error.hpp"
#include "bartest/gw.hpp"
#include "bartest/lineage.hpp"
#include "bartest/mc.hpp"
#include "bartest/report.hpp"

namespace bartest {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDegenerate = 2;

inline int exit_code_for(const Error& e) { return is_statistical(e.code()) ? kExitDegenerate : kExitUsage; }

inline nlohmann::ordered_json to_json(const TestReport& r) {
  nlohmann::ordered_json j;
  j["test"] = r.test;
  j["statistic"] = r.statistic;
  j["df"] = r.df;
  j["p_value"] = r.p_value;
  j["n_Tstar"] = r.n_tstar;
  nlohmann::ordered_json est = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.estimates) est[k] = v;
  j["estimates"] = est;
  j["warnings"] = r.warnings;
  return j;
}

enum class TestKind { Gw, Coeff, Fixed };

inline TestKind parse_test_kind(std::string_view s) {
  switch (parse_which_test(s)) {
    case WhichTest::GwMean: return TestKind::Gw;
    case WhichTest::Coefficient: return TestKind::Coeff;
    case WhichTest::FixedPoint: return TestKind::Fixed;
  }
  return TestKind::Gw;
}

inline const char* to_string(TestKind k) {
  return k == TestKind::Gw ? "gw" : k == TestKind::Coeff ? "coeff" : "fixed";
}

// Runs one test on an ingested lineage. Needs at least three generations.
inline TestReport run_test(const Lineage& data, TestKind which) {
  if (data.tree.depth() < 3)
    throw Error(ErrorCode::InsufficientData, "tests need a lineage with at least generations 0..3");
  if (which == TestKind::Gw) return gw_mean_test(data.tree);
  const BarEstimate est = estimate_bar(data.values, data.tree);
  return which == TestKind::Coeff ? coefficient_test(est) : fixed_point_test(est);
}

inline int cmd_test(const std::filesystem::path& path, TestKind which, std::ostream& out, std::ostream& err) {
  try {
    const Lineage data = ingest(path);
    out << to_json(run_test(data, which)).dump(2) << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e);
  }
}

// All estimates available for a lineage: GW reproduction probabilities and,
// when the design allows, the BAR parameters and noise moments.
inline int cmd_estimate(const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
  try {
    const Lineage data = ingest(path);
    const ObservedCounts counts = observed_counts(data.tree);
    nlohmann::ordered_json j;
    j["depth"] = data.tree.depth();
    j["n_observed"] = counts.cumulative.back();
    nlohmann::ordered_json z = nlohmann::ordered_json::array();
    for (int n = 1; n <= data.tree.depth(); ++n) z.push_back({counts.z[n][0], counts.z[n][1]});
    j["Z"] = z;
    std::vector<std::string> warnings;
    if (data.tree.depth() >= 2) {
      const ReproductionEstimate gw = estimate_reproduction(data.tree);
      j["gw"] = {{"phat", gw.phat}, {"mother_counts", gw.mother_counts}, {"zhat", gw.zhat}};
      try {
        const BarEstimate bar = estimate_bar(data.values, data.tree);
        j["bar"] = {{"a", bar.theta[0]},       {"b", bar.theta[1]},     {"c", bar.theta[2]},
                    {"d", bar.theta[3]},       {"sigma2", bar.sigma2_hat}, {"rho", bar.rho_hat},
                    {"n_pairs", bar.stats.n_pairs}};
        nlohmann::ordered_json cov = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < 4; ++i) {
          nlohmann::ordered_json row = nlohmann::ordered_json::array();
          for (std::size_t k = 0; k < 4; ++k) row.push_back(bar.cov(i, k));
          cov.push_back(row);
        }
        j["bar"]["cov"] = cov;
        if (bar.no_sister_pairs) warnings.emplace_back("no sister pairs observed; rho estimate set to 0");
      } catch (const Error& e) {
        if (!is_statistical(e.code())) throw;
        warnings.emplace_back(std::string("BAR estimation unavailable: ") + e.what());
      }
    } else {
      warnings.emplace_back("lineage too shallow for estimation");
    }
    j["warnings"] = warnings;
    out << j.dump(2) << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e);
  }
}

struct SimulateParams {
  GwModel gw = GwModel::symmetric(kLawP0);
  BarModel bar{0.5, 0.5, 0.5, 0.5, 1.0, 0.5};
  std::optional<double> x1;  // defaults to c/(1-d)
  int depth = 11;
  std::uint64_t seed = 1;
};

// One lineage from a single stream seeded with `seed`: the presence tree is
// drawn first, then the values on the full tree.
inline Lineage simulate_lineage(const SimulateParams& p) {
  Stream rng(p.seed);
  ObservationTree tree = simulate_observation_tree(p.gw, p.depth, rng);
  ValueTree values = simulate_bar_values(p.bar, p.depth, p.x1.value_or(p.bar.fixed_point_odd()), rng);
  return {std::move(tree), std::move(values)};
}

inline std::string format_simulation(const SimulateParams& p) {
  const Lineage l = simulate_lineage(p);
  auto law = [](const ReproductionLaw& r) {
    return detail::shortest(r.p[0]) + "," + detail::shortest(r.p[1]) + "," + detail::shortest(r.p[2]) + "," +
           detail::shortest(r.p[3]);
  };
  const double x1 = p.x1.value_or(p.bar.fixed_point_odd());
  std::vector<std::string> comments{
      "simulated lineage",
      "seed=" + std::to_string(p.seed),
      "law0=" + law(p.gw.law0),
      "law1=" + law(p.gw.law1),
      "bar=" + detail::shortest(p.bar.a) + "," + detail::shortest(p.bar.b) + "," + detail::shortest(p.bar.c) + "," +
          detail::shortest(p.bar.d) + "," + detail::shortest(p.bar.sigma2) + "," + detail::shortest(p.bar.rho),
      "x1=" + detail::shortest(x1)};
  return format_lineage(l.tree, l.values, comments);
}

inline int cmd_simulate(const SimulateParams& p, const std::filesystem::path& out_path, std::ostream& err) {
  try {
    const std::string text = format_simulation(p);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + out_path.string());
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + out_path.string());
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return kExitUsage;
  }
}

// Runs the table and writes emit_table output to `out`; with `pvalues` set,
// also every replica outcome.
inline int cmd_mc(const McConfig& config, int workers, TableFormat format, std::ostream& out, std::ostream& err,
                  std::ostream* pvalues = nullptr) {
  try {
    const McTable table = run_table(config, workers);
    out << emit_table(table, format);
    if (pvalues) *pvalues << emit_pvalues(table);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e);
  }
}

// One row per (file, test): `file,test,p_value`. Files that fail to parse or
// give degenerate statistics get p_value NA and a note on `err`; files whose
// deepest generation is below min_generations are skipped.
inline int cmd_batch(const std::filesystem::path& dir, const std::vector<TestKind>& tests, int min_generations,
                     std::ostream& out, std::ostream& err) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    err << "error: Io: " << dir.string() << " is not a directory\n";
    return kExitUsage;
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  out << "file,test,p_value\n";
  for (const auto& f : files) {
    std::optional<Lineage> data;
    std::string load_error;
    try {
      data = ingest(f);
    } catch (const Error& e) {
      load_error = e.what();
    }
    if (data && data->tree.depth() < min_generations) {
      err << "skip " << f.filename().string() << ": " << data->tree.depth() << " generations\n";
      continue;
    }
    for (TestKind t : tests) {
      out << f.filename().string() << ',' << to_string(t) << ',';
      if (!data) {
        out << "NA\n";
        err << f.filename().string() << ": " << load_error << '\n';
        continue;
      }
      try {
        out << detail::shortest(run_test(*data, t).p_value) << '\n';
      } catch (const Error& e) {
        out << "NA\n";
        err << f.filename().string() << " (" << to_string(t) << "): " << e.what() << '\n';
      }
    }
  }
  return kExitOk;
}

}  // namespace bartest
