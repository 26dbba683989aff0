#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bartest/tree.hpp"
#include "support/fixtures.hpp"

using namespace bartest;

TEST(Kinematics, Root) {
  const auto k = index_kinematics(1);
  EXPECT_EQ(k.generation, 0);
  EXPECT_EQ(k.type, 1);
  EXPECT_FALSE(k.mother.has_value());
  EXPECT_EQ(k.daughters.first.value(), 2);
  EXPECT_EQ(k.daughters.second.value(), 3);
}

TEST(Kinematics, Cell7) {
  const auto k = index_kinematics(7);
  EXPECT_EQ(k.generation, 2);
  EXPECT_EQ(k.type, 1);
  EXPECT_EQ(k.mother->value(), 3);
  EXPECT_EQ(k.daughters.first.value(), 14);
  EXPECT_EQ(k.daughters.second.value(), 15);
}

TEST(Kinematics, Cell2048) {
  const auto k = index_kinematics(2048);
  EXPECT_EQ(k.generation, 11);
  EXPECT_EQ(k.type, 0);
  EXPECT_EQ(k.mother->value(), 1024);
  EXPECT_EQ(k.daughters.first.value(), 4096);
  EXPECT_EQ(k.daughters.second.value(), 4097);
}

TEST(Kinematics, RejectsNonPositive) {
  EXPECT_THROW(index_kinematics(0), Error);
  EXPECT_THROW(index_kinematics(-3), Error);
}

TEST(Kinematics, MotherDaughterRoundTrip) {
  for (std::int64_t k = 2; k < 5000; ++k) {
    const auto kin = index_kinematics(k);
    const auto [d0, d1] = kin.mother->daughters();
    EXPECT_TRUE(d0.value() == k || d1.value() == k);
    EXPECT_EQ(kin.type == 0 ? d0.value() : d1.value(), k);
    EXPECT_EQ(index_kinematics(kin.mother->value()).generation + 1, kin.generation);
  }
}

TEST(Reflect, MirrorsSiblings) {
  EXPECT_EQ(reflect_index(1), 1);
  EXPECT_EQ(reflect_index(2), 3);
  EXPECT_EQ(reflect_index(4), 7);
  EXPECT_EQ(reflect_index(5), 6);
  for (std::int64_t k = 1; k < 4096; ++k) {
    EXPECT_EQ(reflect_index(reflect_index(k)), k);
    EXPECT_EQ(CellIndex(reflect_index(k)).generation(), CellIndex(k).generation());
  }
}

TEST(Counts, CompleteDepth2) {
  const auto c = observed_counts(ObservationTree::complete(2));
  EXPECT_EQ(c.z[1], (std::array<std::int64_t, 2>{1, 1}));
  EXPECT_EQ(c.z[2], (std::array<std::int64_t, 2>{2, 2}));
  EXPECT_EQ(c.cumulative[2], 7);
}

TEST(Counts, RootOnly) {
  const auto c = observed_counts(ObservationTree::root_only(5));
  for (int n = 1; n <= 5; ++n) {
    EXPECT_EQ(c.z[n], (std::array<std::int64_t, 2>{0, 0}));
    EXPECT_EQ(c.cumulative[n], 1);
  }
  EXPECT_TRUE(ObservationTree::root_only(5).extinct());
}

TEST(Counts, PartialDepth2) {
  const auto t = validate(2, {1, 2, 3, 6, 7});
  const auto c = observed_counts(t);
  EXPECT_EQ(c.z[1], (std::array<std::int64_t, 2>{1, 1}));
  EXPECT_EQ(c.z[2], (std::array<std::int64_t, 2>{1, 1}));
  EXPECT_EQ(c.sister_pairs[1], 2);
  EXPECT_EQ(c.sister_pairs[2], 2);
  EXPECT_EQ(c.cumulative[2], 5);
  EXPECT_EQ(c.cumulative_by_type[2], (std::array<std::int64_t, 2>{2, 2}));
}

TEST(Validate, Examples) {
  EXPECT_EQ(validate(1, {1, 2, 3}), ObservationTree::complete(1));
  try {
    validate(1, {2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingRoot);
  }
  try {
    validate(2, {1, 2, 6});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OrphanCell);
    EXPECT_EQ(e.detail(), 6);
  }
}

TEST(Validate, ReportsEveryViolation) {
  try {
    validate(2, {2, 6, 9});
    FAIL();
  } catch (const Error& e) {
    // Cell 2 is an orphan as well since the root is missing.
    ASSERT_EQ(e.violations().size(), 4u);
    EXPECT_EQ(e.violations()[0].code, ErrorCode::MissingRoot);
    EXPECT_EQ(e.violations()[1].code, ErrorCode::IndexOutOfRange);
    EXPECT_EQ(e.violations()[1].detail, 9);
    EXPECT_EQ(e.violations()[2].code, ErrorCode::OrphanCell);
    EXPECT_EQ(e.violations()[2].detail, 2);
    EXPECT_EQ(e.violations()[3].code, ErrorCode::OrphanCell);
    EXPECT_EQ(e.violations()[3].detail, 6);
  }
}

TEST(Validate, DepthBounds) {
  try {
    validate(31, {1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DepthTooLarge);
  }
  EXPECT_THROW(ObservationTree::complete(0), Error);
}

TEST(Tree, ObservedOutOfRangeIsFalse) {
  const auto t = ObservationTree::complete(2);
  EXPECT_FALSE(t.observed(0));
  EXPECT_FALSE(t.observed(8));
  EXPECT_TRUE(t.observed(7));
}

TEST(Tree, FromDeltaChecksInvariants) {
  EXPECT_THROW(ObservationTree::from_delta(2, {0, 1, 0, 0, 0, 0, 1, 0}), Error);
  EXPECT_THROW(ObservationTree::from_delta(2, {0, 1, 1}), Error);
  EXPECT_EQ(ObservationTree::from_delta(1, {0, 1, 1, 1}), ObservationTree::complete(1));
}

// Properties over random trees.

TEST(TreeProperty, GenerationSumsMatchCounts) {
  std::mt19937_64 g(1);
  for (int rep = 0; rep < 200; ++rep) {
    const int depth = 1 + static_cast<int>(g() % 9);
    const auto t = fixtures::random_tree(depth, 0.7, g);
    const auto c = observed_counts(t);
    std::int64_t cumulative = 1;
    for (int n = 1; n <= depth; ++n) {
      std::int64_t direct = 0, pairs_direct = 0;
      for (std::int64_t k = generation_begin(n); k < generation_end(n); ++k) direct += t.delta()[k];
      ASSERT_EQ(direct, c.z[n][0] + c.z[n][1]);
      ASSERT_EQ(direct, t.observed_in_generation(n));
      cumulative += direct;
      ASSERT_EQ(c.cumulative[n], cumulative);
      for (std::int64_t k = 1; k < generation_end(n - 1); ++k)
        pairs_direct += t.observed(k) && t.observed(2 * k) && t.observed(2 * k + 1);
      ASSERT_EQ(c.sister_pairs[n - 1], pairs_direct);
    }
  }
}

TEST(TreeProperty, ExtinctionIsMonotone) {
  std::mt19937_64 g(2);
  int extinct_seen = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const int depth = 2 + static_cast<int>(g() % 8);
    const auto t = fixtures::random_tree(depth, 0.45, g);
    bool empty = false;
    for (int n = 1; n <= depth; ++n) {
      const bool now_empty = t.observed_in_generation(n) == 0;
      if (empty) ASSERT_TRUE(now_empty);
      empty = now_empty;
    }
    extinct_seen += t.extinct();
    ASSERT_EQ(t.extinct(), t.observed_in_generation(depth) == 0);
  }
  EXPECT_GT(extinct_seen, 0);
}

TEST(TreeProperty, ReflectionPreservesCountsAndSwapsTypes) {
  std::mt19937_64 g(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto t = fixtures::random_tree(6, 0.7, g);
    const auto r = t.reflected();
    EXPECT_EQ(r.reflected(), t);
    const auto ct = observed_counts(t), cr = observed_counts(r);
    for (int n = 1; n <= 6; ++n) {
      EXPECT_EQ(ct.z[n][0], cr.z[n][1]);
      EXPECT_EQ(ct.z[n][1], cr.z[n][0]);
      EXPECT_EQ(ct.sister_pairs[n], cr.sister_pairs[n]);
    }
  }
}
