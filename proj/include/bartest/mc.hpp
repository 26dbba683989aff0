#pragma once

// Monte Carlo rejection-proportion tables for the three asymmetry tests.
//
// Every replica is identified by (hypothesis, generation, replica_id) and draws
// from its own stream derived from the master seed, so a table is identical
// for any number of workers. Replicas whose lineage dies out before the target
// generation, or whose data make a test degenerate, are excluded from the
// denominator and counted separately. By default discarded replicas are not
// redrawn; McConfig::refill tops every cell up to the requested count.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <istream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bartest/bar.hpp"
#include "bartest/error.hpp"
#include "bartest/gw.hpp"
#include "bartest/random.hpp"
#include "bartest/tree.hpp"

namespace bartest {

enum class WhichTest { GwMean, Coefficient, FixedPoint };
enum class Hypothesis { H0 = 0, H1 = 1 };

inline const char* to_string(WhichTest t) {
  switch (t) {
    case WhichTest::GwMean: return "gw";
    case WhichTest::Coefficient: return "coeff";
    case WhichTest::FixedPoint: return "fixed";
  }
  return "?";
}

inline const char* to_string(Hypothesis h) { return h == Hypothesis::H0 ? "H0" : "H1"; }

inline WhichTest parse_which_test(std::string_view s) {
  if (s == "gw" || s == "gw_mean") return WhichTest::GwMean;
  if (s == "coeff" || s == "coefficient") return WhichTest::Coefficient;
  if (s == "fixed" || s == "fixed_point") return WhichTest::FixedPoint;
  throw Error(ErrorCode::InvalidArgument, "unknown test '" + std::string(s) + "' (expected gw, coeff or fixed)");
}

// Reproduction law used in the simulation study for both types under the null.
inline constexpr ReproductionLaw kLawP0{{0.04, 0.08, 0.08, 0.8}};
// Perturbed law given to type-1 mothers under the GW alternative.
inline constexpr ReproductionLaw kLawP1{{0.15, 0.08, 0.08, 0.69}};

struct McConfig {
  GwModel gw_null = GwModel::symmetric(kLawP0);
  std::optional<GwModel> gw_alt;
  BarModel bar_null{0.5, 0.5, 0.5, 0.5, 1.0, 0.5};
  std::optional<BarModel> bar_alt;
  // Initial value X_1; defaults to c/(1-d) of the simulated model.
  std::optional<double> x1;
  std::vector<int> generations{7, 8, 9, 10, 11};
  int replicas = 1000;
  std::vector<double> thresholds{0.05, 0.01, 0.001};
  std::uint64_t master_seed = 42;
  WhichTest which_test = WhichTest::GwMean;
  // When set, discarded replicas are replaced by further replica ids until
  // `replicas` usable ones exist (at most 2 * replicas attempts per cell).
  bool refill = false;

  bool has_alternative() const {
    return which_test == WhichTest::GwMean ? gw_alt.has_value() : bar_alt.has_value();
  }

  void validate() const {
    if (replicas < 1) throw Error(ErrorCode::InvalidArgument, "replicas must be >= 1");
    if (generations.empty()) throw Error(ErrorCode::InvalidArgument, "at least one generation is required");
    for (std::size_t i = 0; i < generations.size(); ++i) {
      if (generations[i] < 3 || generations[i] > kMaxDepth)
        throw Error(ErrorCode::InvalidArgument, "generations must lie in [3, 30]");
      if (i > 0 && generations[i] <= generations[i - 1])
        throw Error(ErrorCode::InvalidArgument, "generations must be strictly increasing");
    }
    if (thresholds.empty()) throw Error(ErrorCode::InvalidArgument, "at least one threshold is required");
    for (double t : thresholds)
      if (!(t > 0.0 && t < 1.0)) throw Error(ErrorCode::InvalidArgument, "thresholds must lie in (0, 1)");
    gw_null.validate();
    if (gw_alt) gw_alt->validate();
    bar_null.validate();
    if (bar_alt) bar_alt->validate();
    if (x1 && !std::isfinite(*x1)) throw Error(ErrorCode::InvalidArgument, "x1 must be finite");
  }

  // Standard simulation designs (1: GW test, 2: coefficient test,
  // 3: fixed-point test). The BAR presets use sigma2 = 1, rho = 0.5 and
  // X_1 = c/(1-d).
  static McConfig table_preset(int table) {
    McConfig c;
    switch (table) {
      case 1:
        c.which_test = WhichTest::GwMean;
        c.gw_alt = GwModel{kLawP0, kLawP1};
        break;
      case 2:
      case 3:
        c.which_test = table == 2 ? WhichTest::Coefficient : WhichTest::FixedPoint;
        c.bar_null = {0.5, 0.5, 0.5, 0.5, 1.0, 0.5};
        c.bar_alt = BarModel{0.5, 0.5, 0.5, 0.4, 1.0, 0.5};
        break;
      default:
        throw Error(ErrorCode::InvalidArgument, "table preset must be 1, 2 or 3");
    }
    return c;
  }
};

enum class OutcomeKind { PValue, Extinct, Degenerate };

inline const char* to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::PValue: return "p_value";
    case OutcomeKind::Extinct: return "extinct";
    case OutcomeKind::Degenerate: return "degenerate";
  }
  return "?";
}

struct ReplicaOutcome {
  OutcomeKind kind = OutcomeKind::PValue;
  double p_value = 0.0;  // meaningful for PValue only
  bool operator==(const ReplicaOutcome&) const = default;
};

inline ReplicaOutcome run_replica(const McConfig& config, Hypothesis h, int generation, std::int64_t replica_id) {
  if (h == Hypothesis::H1 && !config.has_alternative())
    throw Error(ErrorCode::InvalidArgument, "H1 requested but no alternative model configured");
  Stream rng(config.master_seed,
             {static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(generation),
              static_cast<std::uint64_t>(replica_id)});

  const bool gw = config.which_test == WhichTest::GwMean;
  const GwModel& gw_model = (gw && h == Hypothesis::H1) ? *config.gw_alt : config.gw_null;
  const ObservationTree tree = simulate_observation_tree(gw_model, generation, rng);
  if (tree.extinct()) return {OutcomeKind::Extinct, 0.0};

  try {
    if (gw) return {OutcomeKind::PValue, gw_mean_test(tree).p_value};
    const BarModel& bar = h == Hypothesis::H1 ? *config.bar_alt : config.bar_null;
    const double x1 = config.x1.value_or(bar.fixed_point_odd());
    const ValueTree values = simulate_bar_values(bar, generation, x1, rng);
    const BarEstimate est = estimate_bar(values, tree);
    const TestReport r =
        config.which_test == WhichTest::Coefficient ? coefficient_test(est) : fixed_point_test(est);
    return {OutcomeKind::PValue, r.p_value};
  } catch (const Error& e) {
    if (is_statistical(e.code())) return {OutcomeKind::Degenerate, 0.0};
    throw;
  }
}

struct McCell {
  int generation = 0;
  Hypothesis hypothesis = Hypothesis::H0;
  double threshold = 0.0;
  std::int64_t rejections = 0;
  std::int64_t n_used = 0;
  std::int64_t n_extinct = 0;
  std::int64_t n_degenerate = 0;

  double proportion() const { return n_used > 0 ? static_cast<double>(rejections) / static_cast<double>(n_used) : 0.0; }
  bool operator==(const McCell&) const = default;
};

// Raw outcomes of every replica of one (generation, hypothesis) pair.
struct McArchive {
  int generation = 0;
  Hypothesis hypothesis = Hypothesis::H0;
  std::vector<ReplicaOutcome> outcomes;
};

struct McTable {
  // Ordered by generation, then hypothesis, then threshold in config order.
  std::vector<McCell> cells;
  std::vector<McArchive> archives;

  std::int64_t extinct_discards() const {
    std::int64_t n = 0;
    for (const auto& a : archives)
      for (const auto& o : a.outcomes) n += o.kind == OutcomeKind::Extinct;
    return n;
  }

  const McCell& cell(int generation, Hypothesis h, double threshold) const {
    for (const auto& c : cells)
      if (c.generation == generation && c.hypothesis == h && c.threshold == threshold) return c;
    throw Error(ErrorCode::InvalidArgument, "no such table cell");
  }
};

inline int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

namespace detail {

struct ReplicaJob {
  std::size_t archive;
  std::int64_t replica_id;
};

// Runs the jobs on `workers` threads; results land at the matching position
// of `results`, so the outcome does not depend on scheduling.
inline void run_jobs(const McConfig& config, const std::vector<McArchive>& archives,
                     const std::vector<ReplicaJob>& jobs, std::vector<ReplicaOutcome>& results, int workers) {
  results.assign(jobs.size(), {});
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const auto& archive = archives[jobs[i].archive];
      try {
        results[i] = run_replica(config, archive.hypothesis, archive.generation, jobs[i].replica_id);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), jobs.size());
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

inline std::int64_t usable(const McArchive& a) {
  std::int64_t n = 0;
  for (const auto& o : a.outcomes) n += o.kind == OutcomeKind::PValue;
  return n;
}

}  // namespace detail

inline McTable run_table(const McConfig& config, int workers = 0) {
  config.validate();
  if (workers <= 0) workers = default_workers();

  std::vector<Hypothesis> hyps{Hypothesis::H0};
  if (config.has_alternative()) hyps.push_back(Hypothesis::H1);

  McTable table;
  for (int g : config.generations)
    for (Hypothesis h : hyps) table.archives.push_back({g, h, {}});

  const std::int64_t target = config.replicas;
  const std::int64_t max_attempts = config.refill ? 2 * target : target;
  std::vector<detail::ReplicaJob> jobs;
  std::vector<ReplicaOutcome> results;
  // Each round asks every cell for as many new replica ids as it is short of,
  // so the ids used are always the shortest prefix that fills the cell.
  for (;;) {
    jobs.clear();
    for (std::size_t a = 0; a < table.archives.size(); ++a) {
      const auto& archive = table.archives[a];
      const auto attempted = static_cast<std::int64_t>(archive.outcomes.size());
      const std::int64_t wanted = attempted == 0 ? target : (config.refill ? target - detail::usable(archive) : 0);
      const std::int64_t n = std::min(wanted, max_attempts - attempted);
      for (std::int64_t r = 0; r < n; ++r) jobs.push_back({a, attempted + r});
    }
    if (jobs.empty()) break;
    detail::run_jobs(config, table.archives, jobs, results, workers);
    for (std::size_t i = 0; i < jobs.size(); ++i) table.archives[jobs[i].archive].outcomes.push_back(results[i]);
  }

  for (const auto& archive : table.archives) {
    std::int64_t extinct = 0, degenerate = 0;
    for (const auto& o : archive.outcomes) {
      extinct += o.kind == OutcomeKind::Extinct;
      degenerate += o.kind == OutcomeKind::Degenerate;
    }
    const auto attempted = static_cast<std::int64_t>(archive.outcomes.size());
    const std::int64_t used = attempted - extinct - degenerate;
    if (2 * (extinct + degenerate) > attempted || (config.refill && used < target))
      throw Error(ErrorCode::TooManyDiscards,
                  "more than half of the replicas were discarded at generation " +
                      std::to_string(archive.generation) + " under " + to_string(archive.hypothesis),
                  archive.generation);
    for (double t : config.thresholds) {
      McCell c{archive.generation, archive.hypothesis, t, 0, used, extinct, degenerate};
      for (const auto& o : archive.outcomes) c.rejections += o.kind == OutcomeKind::PValue && o.p_value < t;
      table.cells.push_back(c);
    }
  }
  return table;
}

enum class TableFormat { Csv, Json };

inline constexpr std::string_view kTableHeader =
    "generation,hypothesis,threshold,rejection_pct,n_used,n_extinct,n_degenerate";

namespace detail {

// Shortest representation that reads back to the same double.
inline std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double rejection_pct(const McCell& c) { return std::round(1000.0 * c.proportion()) / 10.0; }

inline std::string one_decimal(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 1);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string emit_table(const McTable& table, TableFormat format) {
  if (format == TableFormat::Json) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& c : table.cells)
      rows.push_back({{"generation", c.generation},
                      {"hypothesis", to_string(c.hypothesis)},
                      {"threshold", c.threshold},
                      {"rejection_pct", detail::rejection_pct(c)},
                      {"n_used", c.n_used},
                      {"n_extinct", c.n_extinct},
                      {"n_degenerate", c.n_degenerate}});
    return rows.dump(2) + "\n";
  }
  std::string out(kTableHeader);
  out += '\n';
  for (const auto& c : table.cells) {
    out += std::to_string(c.generation) + ',' + to_string(c.hypothesis) + ',' + detail::shortest(c.threshold) + ',' +
           detail::one_decimal(detail::rejection_pct(c)) + ',' + std::to_string(c.n_used) + ',' +
           std::to_string(c.n_extinct) + ',' + std::to_string(c.n_degenerate) + '\n';
  }
  return out;
}

// Per-replica outcomes: generation,hypothesis,replica,outcome,p_value.
inline std::string emit_pvalues(const McTable& table) {
  std::string out = "generation,hypothesis,replica,outcome,p_value\n";
  for (const auto& a : table.archives)
    for (std::size_t r = 0; r < a.outcomes.size(); ++r) {
      const auto& o = a.outcomes[r];
      out += std::to_string(a.generation) + ',' + to_string(a.hypothesis) + ',' + std::to_string(r) + ',' +
             to_string(o.kind) + ',' + (o.kind == OutcomeKind::PValue ? detail::shortest(o.p_value) : "") + '\n';
    }
  return out;
}

// Reads the CSV form back. Rejection counts are recovered from the rounded
// percentage, which is exact whenever n_used <= 1000.
inline McTable parse_table_csv(std::string_view text) {
  McTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::int64_t line_no = 0;
  auto fail = [&] { throw Error(ErrorCode::ParseError, "malformed table at line " + std::to_string(line_no), line_no); };
  if (!std::getline(in, line)) return t;
  ++line_no;
  if (line != kTableHeader) fail();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 7) fail();
    McCell c;
    try {
      c.generation = std::stoi(f[0]);
      if (f[1] == "H0") c.hypothesis = Hypothesis::H0;
      else if (f[1] == "H1") c.hypothesis = Hypothesis::H1;
      else fail();
      c.threshold = std::stod(f[2]);
      const double pct = std::stod(f[3]);
      c.n_used = std::stoll(f[4]);
      c.n_extinct = std::stoll(f[5]);
      c.n_degenerate = std::stoll(f[6]);
      c.rejections = std::llround(pct * static_cast<double>(c.n_used) / 100.0);
    } catch (const std::logic_error&) {
      fail();
    }
    t.cells.push_back(c);
  }
  return t;
}

namespace detail {

inline std::vector<double> parse_reals(std::string_view s) {
  std::vector<double> out;
  std::string tmp(s);
  std::stringstream ss(tmp);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
    if (used != tok.size()) throw std::invalid_argument(tok);
    out.push_back(v);
  }
  return out;
}

inline ReproductionLaw parse_law(std::string_view s) {
  const auto v = parse_reals(s);
  if (v.size() != 4) throw std::invalid_argument("a reproduction law needs 4 probabilities");
  return {{v[0], v[1], v[2], v[3]}};
}

inline BarModel parse_bar(std::string_view s) {
  const auto v = parse_reals(s);
  if (v.size() != 6) throw std::invalid_argument("a BAR model needs a,b,c,d,sigma2,rho");
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

// Applies one key=value setting. Keys mirror McConfig: table, test,
// gw_null_law0, gw_null_law1, gw_alt_law0, gw_alt_law1, bar_null, bar_alt,
// x1, generations, replicas, thresholds, seed, refill. `table` resets the config to
// the preset, so it should come first.
inline void apply_setting(McConfig& c, std::string_view key, std::string_view value) {
  if (key == "table") {
    c = McConfig::table_preset(std::stoi(std::string(value)));
  } else if (key == "test") {
    c.which_test = parse_which_test(value);
  } else if (key == "gw_null_law0") {
    c.gw_null.law0 = detail::parse_law(value);
  } else if (key == "gw_null_law1") {
    c.gw_null.law1 = detail::parse_law(value);
  } else if (key == "gw_alt_law0" || key == "gw_alt_law1") {
    if (!c.gw_alt) c.gw_alt = c.gw_null;
    (key == "gw_alt_law0" ? c.gw_alt->law0 : c.gw_alt->law1) = detail::parse_law(value);
  } else if (key == "bar_null") {
    c.bar_null = detail::parse_bar(value);
  } else if (key == "bar_alt") {
    c.bar_alt = detail::parse_bar(value);
  } else if (key == "x1") {
    c.x1 = std::stod(std::string(value));
  } else if (key == "generations") {
    c.generations.clear();
    for (double g : detail::parse_reals(value)) c.generations.push_back(static_cast<int>(g));
  } else if (key == "replicas") {
    c.replicas = std::stoi(std::string(value));
  } else if (key == "thresholds") {
    c.thresholds = detail::parse_reals(value);
  } else if (key == "refill") {
    c.refill = value == "1" || value == "true" || value == "yes";
  } else if (key == "seed") {
    c.master_seed = std::stoull(std::string(value));
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown configuration key '" + std::string(key) + "'");
  }
}

// Flat key=value text; '#' starts a comment line.
inline void apply_config_text(McConfig& c, std::istream& in) {
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected key=value", line_no);
    try {
      apply_setting(c, detail::trim(std::string_view(t).substr(0, eq)),
                    detail::trim(std::string_view(t).substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
    } catch (const std::logic_error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad value", line_no);
    }
  }
}

}  // namespace bartest
