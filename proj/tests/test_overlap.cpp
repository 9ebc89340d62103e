#include "cshield/constraints.hpp"

#include <set>

#include <gtest/gtest.h>

#include "cshield/common.hpp"

using namespace cshield;

namespace {

ConstraintSpec named_box(const std::string& name, Box b) {
  return {name, InputRegion::single_box(std::move(b)), ConvexOutputSet::unconstrained()};
}

TEST(OverlapKey, StringRoundTrip) {
  const OverlapKey k = OverlapKey::from_string("101");
  EXPECT_TRUE(k.test(0));
  EXPECT_FALSE(k.test(1));
  EXPECT_TRUE(k.test(2));
  EXPECT_EQ(k.to_string(), "101");
  EXPECT_EQ(OverlapKey(0, 3).to_string(), "000");
}

TEST(OverlapKeyOf, MembershipPattern) {
  const std::vector<ConstraintSpec> cs{named_box("a", {{0.0, 2.0}}), named_box("b", {{1.0, 3.0}})};
  EXPECT_EQ(overlap_key_of(cs, Vec{0.5}).to_string(), "10");
  EXPECT_EQ(overlap_key_of(cs, Vec{1.5}).to_string(), "11");
  EXPECT_EQ(overlap_key_of(cs, Vec{2.5}).to_string(), "01");
  EXPECT_EQ(overlap_key_of(cs, Vec{3.5}).to_string(), "00");
  const std::vector<ConstraintSpec> three{named_box("a", {{0.0, 1.0}}), named_box("b", {{0.0, 1.0}}),
                                          named_box("c", {{0.0, 1.0}})};
  EXPECT_EQ(overlap_key_of(three, Vec{5.0}).to_string(), "000");
}

TEST(Enumerate, TwoOverlappingBoxes) {
  const std::vector<ConstraintSpec> cs{
      named_box("a", {{0.0, 2.0}, {0.0, 2.0}}),
      named_box("b", {{1.0, 3.0}, {0.0, 2.0}}),
  };
  const auto part = enumerate_overlaps(cs, InputRegion::single_box({{-1.0, 4.0}, {-1.0, 3.0}}));
  ASSERT_EQ(part.k(), 4);
  EXPECT_EQ(part.keys[0].to_string(), "00");
  EXPECT_EQ(part.keys[1].to_string(), "10");
  EXPECT_EQ(part.keys[2].to_string(), "01");
  EXPECT_EQ(part.keys[3].to_string(), "11");
}

TEST(Enumerate, DisjointBoxesDropIntersectionKey) {
  const std::vector<ConstraintSpec> cs{named_box("a", {{0.0, 1.0}}), named_box("b", {{2.0, 3.0}})};
  const auto part = enumerate_overlaps(cs, InputRegion::single_box({{-1.0, 4.0}}));
  ASSERT_EQ(part.k(), 3);
  EXPECT_EQ(part.index_of(OverlapKey::from_string("11").bits()), -1);
}

TEST(Enumerate, NestedBoxDropsOuterOnlyKey) {
  // a strictly inside b: no point lies in a alone.
  const std::vector<ConstraintSpec> cs{named_box("a", {{1.0, 2.0}}), named_box("b", {{0.0, 3.0}})};
  const auto part = enumerate_overlaps(cs, InputRegion::single_box({{-1.0, 4.0}}));
  ASSERT_EQ(part.k(), 3);
  EXPECT_GE(part.index_of(OverlapKey::from_string("00").bits()), 0);
  EXPECT_GE(part.index_of(OverlapKey::from_string("01").bits()), 0);
  EXPECT_GE(part.index_of(OverlapKey::from_string("11").bits()), 0);
}

TEST(Enumerate, TouchingBoxesKeepTheSharedFacePattern) {
  // Closed regions meeting at x = 1: the point pattern "11" exists only on
  // the shared face but must still be part of the partition.
  const std::vector<ConstraintSpec> cs{named_box("a", {{0.0, 1.0}}), named_box("b", {{1.0, 2.0}})};
  const auto part = enumerate_overlaps(cs, InputRegion::single_box({{-1.0, 3.0}}));
  ASSERT_EQ(part.k(), 4);
  const int idx = part.index_of(OverlapKey::from_string("11").bits());
  ASSERT_GE(idx, 0);
  EXPECT_EQ(part.witnesses[static_cast<size_t>(idx)][0], 1.0);
}

TEST(Enumerate, WitnessesRealizeTheirKeys) {
  const std::vector<ConstraintSpec> cs{
      named_box("a", {{0.0, 2.0}, {0.0, 2.0}}),
      named_box("b", {{1.0, 3.0}, {0.0, 2.0}}),
      named_box("c", {{0.5, 2.5}, {1.0, 3.0}}),
  };
  const auto part = enumerate_overlaps(cs, InputRegion::single_box({{-1.0, 6.0}, {-1.0, 6.0}}));
  for (int i = 0; i < part.k(); ++i) {
    EXPECT_EQ(overlap_key_of(cs, part.witnesses[static_cast<size_t>(i)]).bits(),
              part.keys[static_cast<size_t>(i)].bits());
  }
}

TEST(Enumerate, ThreeBoxGeneralPositionReachesTwoToTheC) {
  const std::vector<ConstraintSpec> cs{
      named_box("a", {{0.0, 2.0}, {0.0, 2.0}}),
      named_box("b", {{1.0, 3.0}, {0.0, 2.0}}),
      named_box("c", {{0.5, 2.5}, {1.0, 3.0}}),
  };
  const auto part = enumerate_overlaps(cs, InputRegion::single_box({{-1.0, 6.0}, {-1.0, 6.0}}));
  EXPECT_EQ(part.k(), 8);
}

TEST(Enumerate, EmptyConstraintListYieldsSingleKey) {
  const auto part = enumerate_overlaps({}, InputRegion::single_box({{0.0, 1.0}}));
  ASSERT_EQ(part.k(), 1);
  EXPECT_EQ(part.keys[0].size(), 0);
}

// Oracle: uniformly sampled membership patterns. Every sampled pattern must
// be enumerated (soundness); every enumerated key must be realized by its
// witness (completeness).
TEST(Enumerate, AgreesWithSampledMembershipOracle) {
  Rng rng(29);
  for (int arrangement = 0; arrangement < 50; ++arrangement) {
    const int dim = 1 + static_cast<int>(rng.below(3));
    const int c = 1 + static_cast<int>(rng.below(6));
    std::vector<ConstraintSpec> cs;
    for (int i = 0; i < c; ++i) {
      std::vector<Box> boxes;
      const int nb = 1 + static_cast<int>(rng.below(2));
      for (int b = 0; b < nb; ++b) {
        Box box(static_cast<size_t>(dim));
        for (int d = 0; d < dim; ++d) {
          const double lo = rng.uniform(0.0, 0.8);
          box[static_cast<size_t>(d)] = {lo, lo + rng.uniform(0.05, 1.0 - lo)};
        }
        boxes.push_back(std::move(box));
      }
      cs.push_back({"c" + std::to_string(i), InputRegion(std::move(boxes)),
                    ConvexOutputSet::unconstrained()});
    }
    Box dom(static_cast<size_t>(dim));
    for (int d = 0; d < dim; ++d) dom[static_cast<size_t>(d)] = {0.0, 1.0};
    const InputRegion domain = InputRegion::single_box(dom);

    const auto part = enumerate_overlaps(cs, domain);
    EXPECT_LE(part.k(), 1 << c);

    std::set<uint32_t> enumerated;
    for (const OverlapKey& k : part.keys) enumerated.insert(k.bits());
    for (int i = 0; i < part.k(); ++i) {
      EXPECT_EQ(overlap_key_of(cs, part.witnesses[static_cast<size_t>(i)]).bits(),
                part.keys[static_cast<size_t>(i)].bits())
          << "arrangement " << arrangement;
    }
    for (int s = 0; s < 10000; ++s) {
      Vec x(static_cast<size_t>(dim));
      for (int d = 0; d < dim; ++d) x[static_cast<size_t>(d)] = rng.uniform01();
      EXPECT_TRUE(enumerated.count(overlap_key_of(cs, x).bits()))
          << "arrangement " << arrangement;
    }
  }
}

TEST(Validate, RejectsBadConstraintLists) {
  std::vector<ConstraintSpec> dup{named_box("x", {{0.0, 1.0}}), named_box("x", {{0.0, 1.0}})};
  EXPECT_THROW(validate_constraints(dup, 1), SpecError);
  std::vector<ConstraintSpec> empty{{"empty", InputRegion(), ConvexOutputSet::unconstrained()}};
  EXPECT_THROW(validate_constraints(empty, 1), SpecError);
  std::vector<ConstraintSpec> wrong_dim{named_box("x", {{0.0, 1.0}})};
  EXPECT_THROW(validate_constraints(wrong_dim, 2), SpecError);
}

}  // namespace
