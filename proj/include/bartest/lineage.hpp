#pragma once

// Lineage files: CSV with a header `index,value` and one row per observed
// cell. Missing cells are simply absent. Lines starting with '#' are comments;
// a `# depth=N` comment pins the tree depth, otherwise the depth is the
// largest generation present.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bartest/bar.hpp"
#include "bartest/error.hpp"
#include "bartest/tree.hpp"

namespace bartest {

struct Lineage {
  ObservationTree tree;
  ValueTree values;
};

namespace detail {

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] inline void parse_error(std::int64_t line, const std::string& why) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + why, line);
}

}  // namespace detail

inline Lineage parse_lineage(std::istream& in) {
  std::string raw;
  std::int64_t line_no = 0;
  bool header_seen = false;
  int pinned_depth = 0;
  std::map<std::int64_t, std::pair<double, std::int64_t>> rows;  // index -> (value, line)

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::strip(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = detail::strip(line.substr(1));
      if (body.starts_with("depth=")) {
        const auto v = body.substr(6);
        if (std::from_chars(v.data(), v.data() + v.size(), pinned_depth).ec != std::errc{})
          detail::parse_error(line_no, "bad depth directive");
      }
      continue;
    }
    if (!header_seen) {
      if (line != "index,value") detail::parse_error(line_no, "expected header 'index,value'");
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) detail::parse_error(line_no, "expected 'index,value'");
    const std::string_view idx_s = detail::strip(line.substr(0, comma));
    const std::string_view val_s = detail::strip(line.substr(comma + 1));
    std::int64_t k = 0;
    double v = 0.0;
    auto r1 = std::from_chars(idx_s.data(), idx_s.data() + idx_s.size(), k);
    if (r1.ec != std::errc{} || r1.ptr != idx_s.data() + idx_s.size() || k < 1)
      detail::parse_error(line_no, "cell index must be a positive integer");
    auto r2 = std::from_chars(val_s.data(), val_s.data() + val_s.size(), v);
    if (r2.ec != std::errc{} || r2.ptr != val_s.data() + val_s.size() || !std::isfinite(v))
      detail::parse_error(line_no, "value must be a finite decimal number");
    if (CellIndex(k).generation() > kMaxDepth)
      throw Error(ErrorCode::IndexOutOfRange,
                  "line " + std::to_string(line_no) + ": cell " + std::to_string(k) + " is deeper than " +
                      std::to_string(kMaxDepth) + " generations",
                  k);
    if (!rows.emplace(k, std::make_pair(v, line_no)).second)
      throw Error(ErrorCode::DuplicateIndex,
                  "line " + std::to_string(line_no) + ": duplicate cell index " + std::to_string(k), k);
  }
  if (!header_seen) detail::parse_error(line_no + 1, "missing header 'index,value'");
  if (!rows.contains(1)) throw Error(ErrorCode::MissingRoot, "lineage has no root cell (index 1)", 1);

  int depth = std::max(1, CellIndex(rows.rbegin()->first).generation());
  if (pinned_depth > 0) {
    if (pinned_depth < depth)
      throw Error(ErrorCode::IndexOutOfRange, "cells present beyond the declared depth", rows.rbegin()->first);
    depth = pinned_depth;
  }

  std::vector<std::int64_t> indices;
  indices.reserve(rows.size());
  for (const auto& [k, _] : rows) indices.push_back(k);
  ObservationTree tree = ObservationTree::root_only(1);
  try {
    tree = validate(depth, indices);
  } catch (const Error& e) {
    const auto it = rows.find(e.detail());
    const std::string where =
        it != rows.end() ? "line " + std::to_string(it->second.second) + ": " : std::string{};
    throw Error(e.violations().empty() ? std::vector<Violation>{{e.code(), e.detail()}} : e.violations(),
                where + e.what());
  }
  ValueTree values(depth);
  for (const auto& [k, vl] : rows) values[k] = vl.first;
  return {std::move(tree), std::move(values)};
}

inline Lineage ingest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_lineage(in);
}

// Observed cells in label order, values with 17 significant digits so the
// file reads back to identical doubles.
inline std::string format_lineage(const ObservationTree& tree, const ValueTree& values,
                                  const std::vector<std::string>& comments = {}) {
  check_same_depth(values, tree);
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += "# depth=" + std::to_string(tree.depth()) + "\n";
  out += "index,value\n";
  char buf[64];
  for (const auto k : tree.observed_cells()) {
    std::snprintf(buf, sizeof buf, "%.17g", values[k]);
    out += std::to_string(k) + ',' + buf + '\n';
  }
  return out;
}

}  // namespace bartest
