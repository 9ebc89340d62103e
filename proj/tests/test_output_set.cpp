#include "cshield/output_set.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "cshield/common.hpp"

using namespace cshield;

namespace {

TEST(Project, IntervalMidpointAtZero) {
  const auto s = ConvexOutputSet::interval(0.7, 1.0);
  EXPECT_DOUBLE_EQ(s.project(Vec{0.0})[0], 0.85);
}

TEST(Project, IntervalMatchesDirectFormula) {
  const auto s = ConvexOutputSet::interval(0.7, 1.0);
  const double expected = 0.7 + 0.3 / (1.0 + std::exp(-0.3));
  EXPECT_NEAR(s.project(Vec{0.3})[0], 0.872332755043498, 1e-12);
  EXPECT_DOUBLE_EQ(s.project(Vec{0.3})[0], expected);
}

TEST(Project, ScoreNotHighestRule) {
  const auto s = ConvexOutputSet::score_not_highest({2}, 0.0001);
  const Vec y = s.project(Vec{1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_DOUBLE_EQ(y[1], 2.0);
  EXPECT_DOUBLE_EQ(y[2], 0.9999);
}

TEST(Project, ScoreNotHighestMinExcludesUnsafeIndices) {
  // The unsafe coordinate itself holds the smallest raw value; the min must
  // come from the remaining coordinates.
  const auto s = ConvexOutputSet::score_not_highest({0}, 0.5);
  const Vec y = s.project(Vec{-10.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(y[0], 1.5);
}

TEST(Project, ScoreNotHighestIdempotentForMultipleUnsafe) {
  const auto s = ConvexOutputSet::score_not_highest({1, 3}, 0.0001);
  const Vec y = s.project(Vec{4.0, 9.0, 2.0, 9.0, 5.0});
  EXPECT_DOUBLE_EQ(y[1], 2.0 - 0.0001);
  EXPECT_DOUBLE_EQ(y[3], 2.0 - 0.0001);
  EXPECT_TRUE(s.contains(y));
  EXPECT_EQ(s.project(y), y);  // projecting a member changes nothing
}

TEST(Project, AllCoordinatesUnsafeIsUnsatisfiable) {
  const auto s = ConvexOutputSet::score_not_highest({0, 1, 2}, 0.0001);
  EXPECT_THROW(s.project(Vec{1.0, 2.0, 3.0}), SpecError);
}

TEST(Project, MembershipWithMarginOverRandomRaws) {
  Rng rng(5);
  const auto interval = ConvexOutputSet::interval(-0.25, 1.5);
  const auto above = ConvexOutputSet::half_line_above(2.0);
  const auto below = ConvexOutputSet::half_line_below(-1.0);
  const auto snh = ConvexOutputSet::score_not_highest({1, 7}, 0.0001);
  for (int i = 0; i < 10000; ++i) {
    // strict interiority within the range where a double can represent the
    // gap to the bound
    const double raw = rng.uniform(-30.0, 30.0);
    const double yi = interval.project(Vec{raw})[0];
    EXPECT_GT(yi, interval.lo());
    EXPECT_LT(yi, interval.hi());
    EXPECT_GT(above.project(Vec{raw})[0], above.lo());
    EXPECT_LT(below.project(Vec{raw})[0], below.hi());
    Vec scores(9);
    for (double& v : scores) v = rng.uniform(-3.0, 3.0);
    const Vec ys = snh.project(scores);
    EXPECT_TRUE(snh.contains(ys));
    EXPECT_GT(snh.margin(ys), 0.0);
  }
  // extreme raw values saturate onto the boundary of the closed set but never
  // leave it and never produce non-finite output
  for (const double raw : {-700.0, -40.0, 40.0, 700.0}) {
    EXPECT_GE(interval.margin(interval.project(Vec{raw})), 0.0);
    EXPECT_GE(above.margin(above.project(Vec{raw})), 0.0);
    EXPECT_GE(below.margin(below.project(Vec{raw})), 0.0);
    EXPECT_TRUE(std::isfinite(above.project(Vec{raw})[0]));
  }
}

TEST(Intersect, IntervalPair) {
  const auto s = intersect_output_sets(
      {ConvexOutputSet::interval(0.7, 1.0), ConvexOutputSet::interval(0.5, 0.8)});
  EXPECT_EQ(s.kind(), OutputSetKind::kInterval);
  EXPECT_DOUBLE_EQ(s.lo(), 0.7);
  EXPECT_DOUBLE_EQ(s.hi(), 0.8);
}

TEST(Intersect, UnconstrainedIsIdentity) {
  const auto s = intersect_output_sets(
      {ConvexOutputSet::unconstrained(), ConvexOutputSet::interval(0.0, 1.0)});
  EXPECT_EQ(s.kind(), OutputSetKind::kInterval);
  EXPECT_DOUBLE_EQ(s.lo(), 0.0);
  EXPECT_DOUBLE_EQ(s.hi(), 1.0);
}

TEST(Intersect, DisjointIntervalsThrow) {
  EXPECT_THROW(intersect_output_sets(
                   {ConvexOutputSet::interval(0.0, 0.2), ConvexOutputSet::interval(0.5, 1.0)}),
               InfeasibleIntersection);
}

TEST(Intersect, HalfLinesFormInterval) {
  const auto s = intersect_output_sets(
      {ConvexOutputSet::half_line_above(0.0), ConvexOutputSet::half_line_below(2.0)});
  EXPECT_EQ(s.kind(), OutputSetKind::kInterval);
  EXPECT_DOUBLE_EQ(s.lo(), 0.0);
  EXPECT_DOUBLE_EQ(s.hi(), 2.0);
}

TEST(Intersect, ScoreSetsUnionIndices) {
  const auto s = intersect_output_sets({ConvexOutputSet::score_not_highest({1}, 0.0001),
                                        ConvexOutputSet::score_not_highest({4}, 0.0001)});
  EXPECT_EQ(s.kind(), OutputSetKind::kScoreNotHighest);
  EXPECT_EQ(s.unsafe_indices(), (std::vector<int>{1, 4}));
}

TEST(Intersect, EmptyListIsUnconstrained) {
  EXPECT_EQ(intersect_output_sets({}).kind(), OutputSetKind::kUnconstrained);
}

TEST(Intersect, MembershipEquivalenceOnRandomPoints) {
  Rng rng(17);
  const std::vector<ConvexOutputSet> pair{ConvexOutputSet::interval(-1.0, 0.6),
                                          ConvexOutputSet::half_line_above(-0.4)};
  const auto both = intersect_output_sets(pair);
  for (int i = 0; i < 10000; ++i) {
    const Vec y{rng.uniform(-2.0, 2.0)};
    const bool in_both = pair[0].contains(y) && pair[1].contains(y);
    EXPECT_EQ(both.contains(y), in_both) << "y = " << y[0];
  }
}

TEST(Margin, IntervalSignConvention) {
  const auto s = ConvexOutputSet::interval(0.0, 1.0);
  EXPECT_GT(s.margin(Vec{0.5}), 0.0);
  EXPECT_DOUBLE_EQ(s.margin(Vec{0.0}), 0.0);
  EXPECT_LT(s.margin(Vec{1.25}), 0.0);
  EXPECT_TRUE(s.contains(Vec{1.0 + 1e-10}, 1e-9));
  EXPECT_FALSE(s.contains(Vec{1.0 + 1e-8}, 1e-9));
}

TEST(Margin, ScoreNotHighestIsExact) {
  const auto s = ConvexOutputSet::score_not_highest({0}, 0.0001);
  EXPECT_FALSE(s.contains(Vec{3.0, 1.0, 2.0}));  // unsafe score is highest
  EXPECT_FALSE(s.contains(Vec{2.0, 2.0, 1.0}));  // tied for highest counts
  EXPECT_TRUE(s.contains(Vec{1.999999, 2.0, 1.0}));
}

TEST(Construct, InvalidArguments) {
  EXPECT_THROW(ConvexOutputSet::interval(1.0, 1.0), SpecError);
  EXPECT_THROW(ConvexOutputSet::interval(2.0, 1.0), SpecError);
  EXPECT_THROW(ConvexOutputSet::score_not_highest({}, 0.0001), SpecError);
  EXPECT_THROW(ConvexOutputSet::score_not_highest({1}, 0.0), SpecError);
  EXPECT_THROW(ConvexOutputSet::score_not_highest({-1}, 0.1), SpecError);
}

}  // namespace
