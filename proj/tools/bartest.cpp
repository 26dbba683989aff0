// bartest: simulate lineages, estimate BAR / GW parameters, run the
// asymmetry tests on lineage files and produce Monte Carlo tables.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bartest/commands.hpp"
#include "bartest/mc.hpp"

namespace {

int workers_from_env() {
  if (const char* s = std::getenv("BARTEST_WORKERS")) {
    const int n = std::atoi(s);
    if (n > 0) return n;
  }
  return bartest::default_workers();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymmetry tests for bifurcating autoregressive lineages with missing cells"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate one lineage and write it as a lineage CSV");
  bartest::SimulateParams sp;
  std::string law0_s = "0.04,0.08,0.08,0.8", law1_s = "0.04,0.08,0.08,0.8";
  std::optional<double> sim_x1;
  std::string sim_out;
  sim->add_option("--depth", sp.depth, "Deepest generation")->check(CLI::Range(1, bartest::kMaxDepth));
  sim->add_option("--seed", sp.seed, "Random seed");
  sim->add_option("--law0", law0_s, "Type-0 reproduction law p(0,0),p(1,0),p(0,1),p(1,1)");
  sim->add_option("--law1", law1_s, "Type-1 reproduction law");
  sim->add_option("--a", sp.bar.a);
  sim->add_option("--b", sp.bar.b);
  sim->add_option("--c", sp.bar.c);
  sim->add_option("--d", sp.bar.d);
  sim->add_option("--sigma2", sp.bar.sigma2, "Noise variance");
  sim->add_option("--rho", sp.bar.rho, "Sister noise covariance");
  sim->add_option("--x1", sim_x1, "Root value (default c/(1-d))");
  sim->add_option("-o,--out", sim_out, "Output file")->required();

  // estimate
  auto* est = app.add_subcommand("estimate", "Print all parameter estimates of a lineage file as JSON");
  std::string est_path;
  est->add_option("file", est_path)->required();

  // test
  auto* tst = app.add_subcommand("test", "Run one asymmetry test on a lineage file");
  std::string test_path, test_which = "coeff";
  tst->add_option("file", test_path)->required();
  tst->add_option("--test", test_which, "gw, coeff or fixed")->check(CLI::IsMember({"gw", "coeff", "fixed"}));

  // batch
  auto* bat = app.add_subcommand("batch", "Test every lineage file of a directory");
  std::string batch_dir, batch_which = "all";
  int min_generations = 0;
  bat->add_option("dir", batch_dir)->required();
  bat->add_option("--test", batch_which, "gw, coeff, fixed or all")
      ->check(CLI::IsMember({"gw", "coeff", "fixed", "all"}));
  bat->add_option("--min-generations", min_generations, "Skip files whose deepest generation is smaller");

  // mc
  auto* mc = app.add_subcommand("mc", "Monte Carlo rejection-proportion table");
  std::optional<int> table_preset;
  std::string config_path, mc_test, generations_s, thresholds_s, format = "csv", mc_out, pvalues_out;
  std::optional<int> replicas;
  std::optional<std::uint64_t> seed;
  int workers = workers_from_env();
  bool refill = false;
  mc->add_option("--table", table_preset, "Preset design: 1 (GW), 2 (coefficient) or 3 (fixed point)")->check(CLI::Range(1, 3));
  mc->add_option("--config", config_path, "key=value configuration file");
  mc->add_option("--test", mc_test, "gw, coeff or fixed");
  mc->add_option("--replicas", replicas);
  mc->add_option("--seed", seed);
  mc->add_option("--generations", generations_s, "Comma-separated, e.g. 7,8,9,10,11");
  mc->add_option("--thresholds", thresholds_s, "Comma-separated, e.g. 0.05,0.01,0.001");
  mc->add_flag("--refill", refill, "Replace extinct/degenerate replicas until every cell has --replicas usable ones");
  mc->add_option("--workers", workers, "Worker threads (default $BARTEST_WORKERS or all cores)");
  mc->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
  mc->add_option("-o,--out", mc_out, "Table output file (default stdout)");
  mc->add_option("--pvalues", pvalues_out, "Also write every replica outcome to this CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bartest::kExitUsage;
  }

  try {
    if (*sim) {
      sp.gw.law0 = bartest::detail::parse_law(law0_s);
      sp.gw.law1 = bartest::detail::parse_law(law1_s);
      sp.x1 = sim_x1;
      return bartest::cmd_simulate(sp, sim_out, std::cerr);
    }
    if (*est) return bartest::cmd_estimate(est_path, std::cout, std::cerr);
    if (*tst) return bartest::cmd_test(test_path, bartest::parse_test_kind(test_which), std::cout, std::cerr);
    if (*bat) {
      std::vector<bartest::TestKind> kinds;
      if (batch_which == "all")
        kinds = {bartest::TestKind::Gw, bartest::TestKind::Coeff, bartest::TestKind::Fixed};
      else
        kinds = {bartest::parse_test_kind(batch_which)};
      return bartest::cmd_batch(batch_dir, kinds, min_generations, std::cout, std::cerr);
    }
    if (*mc) {
      bartest::McConfig config;
      if (table_preset) config = bartest::McConfig::table_preset(*table_preset);
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw bartest::Error(bartest::ErrorCode::Io, "cannot open " + config_path);
        bartest::apply_config_text(config, in);
      }
      if (!mc_test.empty()) bartest::apply_setting(config, "test", mc_test);
      if (replicas) config.replicas = *replicas;
      if (seed) config.master_seed = *seed;
      if (refill) config.refill = true;
      if (!generations_s.empty()) bartest::apply_setting(config, "generations", generations_s);
      if (!thresholds_s.empty()) bartest::apply_setting(config, "thresholds", thresholds_s);
      const auto fmt = format == "json" ? bartest::TableFormat::Json : bartest::TableFormat::Csv;
      std::ofstream table_file, pvalue_file;
      if (!mc_out.empty() && mc_out != "-") {
        table_file.open(mc_out, std::ios::binary);
        if (!table_file) throw bartest::Error(bartest::ErrorCode::Io, "cannot write " + mc_out);
      }
      if (!pvalues_out.empty()) {
        pvalue_file.open(pvalues_out, std::ios::binary);
        if (!pvalue_file) throw bartest::Error(bartest::ErrorCode::Io, "cannot write " + pvalues_out);
      }
      std::ostream& table_stream = table_file.is_open() ? static_cast<std::ostream&>(table_file) : std::cout;
      return bartest::cmd_mc(config, workers, fmt, table_stream, std::cerr,
                             pvalue_file.is_open() ? &pvalue_file : nullptr);
    }
  } catch (const bartest::Error& e) {
    std::cerr << "error: " << bartest::to_string(e.code()) << ": " << e.what() << '\n';
    return bartest::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bartest::kExitUsage;
  }
  return bartest::kExitUsage;
}
