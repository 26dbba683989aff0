#pragma once

// Cell labelling on the regular binary tree and the observation process.
//
// The root is cell 1; the daughters of cell k are 2k (type 0, even) and 2k+1
// (type 1, odd). Generation n holds labels 2^n .. 2^(n+1)-1, so every
// generation is a contiguous slice of a flat array indexed by label.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bartest/error.hpp"

namespace bartest {

inline constexpr int kMaxDepth = 30;

class CellIndex {
 public:
  explicit CellIndex(std::int64_t k) : k_(k) {
    if (k < 1)
      throw Error(ErrorCode::IndexOutOfRange, "cell index must be >= 1, got " + std::to_string(k), k);
  }

  std::int64_t value() const noexcept { return k_; }
  int generation() const noexcept { return std::bit_width(static_cast<std::uint64_t>(k_)) - 1; }
  int type() const noexcept { return static_cast<int>(k_ & 1); }
  std::optional<CellIndex> mother() const {
    if (k_ == 1) return std::nullopt;
    return CellIndex(k_ / 2);
  }
  std::pair<CellIndex, CellIndex> daughters() const { return {CellIndex(2 * k_), CellIndex(2 * k_ + 1)}; }

  auto operator<=>(const CellIndex&) const = default;

 private:
  std::int64_t k_;
};

struct Kinematics {
  int generation;
  int type;
  std::optional<CellIndex> mother;
  std::pair<CellIndex, CellIndex> daughters;
};

inline Kinematics index_kinematics(std::int64_t k) {
  const CellIndex c(k);
  return {c.generation(), c.type(), c.mother(), c.daughters()};
}

// Label of the mirror image of cell k when the two daughters of every cell
// are swapped: keep the leading 1 bit and complement the path bits.
inline std::int64_t reflect_index(std::int64_t k) {
  const int g = CellIndex(k).generation();
  return k ^ ((std::int64_t{1} << g) - 1);
}

inline std::int64_t generation_begin(int n) { return std::int64_t{1} << n; }
inline std::int64_t generation_end(int n) { return std::int64_t{1} << (n + 1); }

// Presence indicators delta_k over a depth-n tree. Always satisfies
// delta_1 = 1 and delta_k = 1 => delta_{k/2} = 1.
class ObservationTree {
 public:
  int depth() const noexcept { return depth_; }

  // One past the largest label: 2^(depth+1).
  std::int64_t label_end() const noexcept { return static_cast<std::int64_t>(delta_.size()); }

  // Labels beyond the tree are reported unobserved.
  bool observed(std::int64_t k) const noexcept {
    return k >= 1 && k < label_end() && delta_[static_cast<std::size_t>(k)] != 0;
  }

  std::span<const std::uint8_t> delta() const noexcept { return delta_; }

  // Observed labels in increasing order.
  std::vector<std::int64_t> observed_cells() const {
    std::vector<std::int64_t> out;
    for (std::int64_t k = 1; k < label_end(); ++k)
      if (delta_[static_cast<std::size_t>(k)]) out.push_back(k);
    return out;
  }

  std::int64_t observed_in_generation(int n) const {
    std::int64_t c = 0;
    for (std::int64_t k = generation_begin(n); k < generation_end(n); ++k) c += delta_[static_cast<std::size_t>(k)];
    return c;
  }

  // Some generation 1..depth has no observed cell.
  bool extinct() const {
    for (int n = 1; n <= depth_; ++n)
      if (observed_in_generation(n) == 0) return true;
    return false;
  }

  // Mirror image: the observation of daughter 2k moves to 2k+1 and vice
  // versa at every node.
  ObservationTree reflected() const {
    ObservationTree t = *this;
    for (std::int64_t k = 1; k < label_end(); ++k)
      t.delta_[static_cast<std::size_t>(reflect_index(k))] = delta_[static_cast<std::size_t>(k)];
    return t;
  }

  static ObservationTree complete(int depth) {
    check_depth(depth);
    ObservationTree t(depth);
    std::fill(t.delta_.begin() + 1, t.delta_.end(), std::uint8_t{1});
    return t;
  }

  static ObservationTree root_only(int depth) {
    check_depth(depth);
    ObservationTree t(depth);
    t.delta_[1] = 1;
    return t;
  }

  // Builds a tree from a full indicator array of length 2^(depth+1)
  // (entry 0 ignored), checking both invariants.
  static ObservationTree from_delta(int depth, std::vector<std::uint8_t> delta);

  static void check_depth(int depth) {
    if (depth < 1 || depth > kMaxDepth)
      throw Error(ErrorCode::DepthTooLarge,
                  "tree depth must lie in [1, " + std::to_string(kMaxDepth) + "], got " +
                      std::to_string(depth),
                  depth);
  }

  bool operator==(const ObservationTree&) const = default;

 private:
  explicit ObservationTree(int depth)
      : depth_(depth), delta_(static_cast<std::size_t>(generation_end(depth)), 0) {}

  friend ObservationTree validate(int depth, std::span<const std::int64_t> observed_indices);

  int depth_;
  std::vector<std::uint8_t> delta_;
};

namespace detail {

inline std::string describe(const std::vector<Violation>& v) {
  std::string s;
  for (const auto& x : v) {
    if (!s.empty()) s += "; ";
    s += to_string(x.code);
    if (x.code != ErrorCode::MissingRoot) s += "(" + std::to_string(x.detail) + ")";
  }
  return s;
}

inline void check_orphans(std::span<const std::uint8_t> delta, std::vector<Violation>& out) {
  if (delta.size() < 2 || delta[1] == 0) out.push_back({ErrorCode::MissingRoot, 1});
  for (std::size_t k = 2; k < delta.size(); ++k)
    if (delta[k] && !delta[k / 2]) out.push_back({ErrorCode::OrphanCell, static_cast<std::int64_t>(k)});
}

}  // namespace detail

// Checked construction from a list of observed labels. Throws an Error
// carrying every violation found (MissingRoot, OrphanCell(k),
// IndexOutOfRange(k)); duplicates are harmless here.
inline ObservationTree validate(int depth, std::span<const std::int64_t> observed_indices) {
  ObservationTree::check_depth(depth);
  ObservationTree t(depth);
  std::vector<Violation> violations;
  for (const auto k : observed_indices) {
    if (k < 1 || k >= t.label_end()) {
      violations.push_back({ErrorCode::IndexOutOfRange, k});
      continue;
    }
    t.delta_[static_cast<std::size_t>(k)] = 1;
  }
  detail::check_orphans(t.delta_, violations);
  if (!violations.empty()) {
    std::vector<Violation> sorted;
    // Report missing root first, then everything else in discovery order.
    for (auto& v : violations)
      if (v.code == ErrorCode::MissingRoot) sorted.push_back(v);
    for (auto& v : violations)
      if (v.code != ErrorCode::MissingRoot) sorted.push_back(v);
    throw Error(sorted, "invalid observation tree: " + detail::describe(sorted));
  }
  return t;
}

inline ObservationTree validate(int depth, std::initializer_list<std::int64_t> observed_indices) {
  return validate(depth, std::span<const std::int64_t>(observed_indices.begin(), observed_indices.size()));
}

inline ObservationTree ObservationTree::from_delta(int depth, std::vector<std::uint8_t> delta) {
  check_depth(depth);
  if (delta.size() != static_cast<std::size_t>(generation_end(depth)))
    throw Error(ErrorCode::InvalidArgument, "indicator array length does not match depth");
  for (auto& d : delta) d = d ? 1 : 0;
  delta[0] = 0;
  std::vector<Violation> violations;
  detail::check_orphans(delta, violations);
  if (!violations.empty()) throw Error(violations, "invalid observation tree: " + detail::describe(violations));
  ObservationTree t(depth);
  t.delta_ = std::move(delta);
  return t;
}

// Observed-cell bookkeeping. Vectors are indexed by generation 0..depth.
struct ObservedCounts {
  int depth = 0;
  // z[n] = (Z_n^0, Z_n^1), observed cells of each type in generation n; z[0] = (0, 0).
  std::vector<std::array<std::int64_t, 2>> z;
  // |G_n^*|
  std::vector<std::int64_t> in_generation;
  // |T_n^*| = 1 + sum_{l<=n} (Z_l^0 + Z_l^1)
  std::vector<std::int64_t> cumulative;
  // |T_n^{*01}| = #{k in T_n : delta_2k delta_2k+1 = 1}
  std::vector<std::int64_t> sister_pairs;
  // sum_{l=1..n} Z_l^i
  std::vector<std::array<std::int64_t, 2>> cumulative_by_type;
};

inline ObservedCounts observed_counts(const ObservationTree& tree) {
  const int n = tree.depth();
  ObservedCounts c;
  c.depth = n;
  c.z.assign(n + 1, {0, 0});
  c.in_generation.assign(n + 1, 0);
  c.cumulative.assign(n + 1, 0);
  c.sister_pairs.assign(n + 1, 0);
  c.cumulative_by_type.assign(n + 1, {0, 0});

  c.in_generation[0] = 1;
  c.cumulative[0] = 1;
  for (int g = 1; g <= n; ++g) {
    for (std::int64_t k = generation_begin(g - 1); k < generation_end(g - 1); ++k) {
      const bool d0 = tree.observed(2 * k);
      const bool d1 = tree.observed(2 * k + 1);
      c.z[g][0] += d0;
      c.z[g][1] += d1;
      c.sister_pairs[g - 1] += (d0 && d1);
    }
    c.in_generation[g] = c.z[g][0] + c.z[g][1];
    c.cumulative[g] = c.cumulative[g - 1] + c.in_generation[g];
    c.cumulative_by_type[g] = {c.cumulative_by_type[g - 1][0] + c.z[g][0],
                               c.cumulative_by_type[g - 1][1] + c.z[g][1]};
    if (g > 1) c.sister_pairs[g - 1] += c.sister_pairs[g - 2];
  }
  // Cells of the last generation have no daughters inside the tree.
  c.sister_pairs[n] = n >= 1 ? c.sister_pairs[n - 1] : 0;
  return c;
}

}  // namespace bartest
