#include "cshield/proximity.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "cshield/common.hpp"

using namespace cshield;

namespace {

TEST(ProximityEval, ZeroAtZeroDistance) {
  EXPECT_EQ(proximity_eval(ProximityParams::from_sigmas(1.0, 2.0), 0.0), 0.0);
  EXPECT_EQ(proximity_eval(ProximityParams::from_sigmas(0.01, 5.0), 0.0), 0.0);
}

TEST(ProximityEval, SpotValues) {
  const auto p = ProximityParams::from_sigmas(1.0, 2.0);
  EXPECT_NEAR(proximity_eval(p, 1.0), 0.63212055882855767, 1e-12);
  EXPECT_NEAR(proximity_eval(p, 10.0), 1.0, 1e-15);
}

TEST(ProximityEval, NegativeDistanceThrows) {
  EXPECT_THROW(proximity_eval(ProximityParams::from_sigmas(1.0, 2.0), -0.1), SpecError);
}

TEST(ProximityEval, RangeAndMonotonicity) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = ProximityParams::from_sigmas(rng.uniform(0.05, 5.0), rng.uniform(1.01, 6.0));
    std::vector<double> ds(64);
    for (double& d : ds) d = rng.uniform(0.0, 20.0);
    std::sort(ds.begin(), ds.end());
    double prev = -1.0;
    for (double d : ds) {
      const double v = proximity_eval(p, d);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      EXPECT_GE(v, prev);
      prev = v;
    }
    EXPECT_LT(proximity_eval(p, 0.3 * p.sigma1()), 1.0);
  }
}

TEST(ProximityEval, ContinuityUnderShrinkingSteps) {
  const auto p = ProximityParams::from_sigmas(0.7, 2.5);
  const double d0 = 0.9;
  double delta = 0.1;
  double prev_gap = std::fabs(proximity_eval(p, d0 + delta) - proximity_eval(p, d0));
  for (int i = 0; i < 12; ++i) {
    delta *= 0.5;
    const double gap = std::fabs(proximity_eval(p, d0 + delta) - proximity_eval(p, d0));
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 1e-4);
}

TEST(ProximityGrad, ZeroDistanceConvention) {
  const auto g = proximity_grad(ProximityParams::from_sigmas(1.0, 2.0), 0.0);
  EXPECT_EQ(g.wrt_a, 0.0);
  EXPECT_EQ(g.wrt_b, 0.0);
  EXPECT_EQ(g.wrt_d, 0.0);
}

TEST(ProximityGrad, HandDerivedSpotValue) {
  // sigma1 = 1, sigma2 = 2, d = 1: d(prox)/dd = 2 * exp(-1).
  const auto g = proximity_grad(ProximityParams::from_sigmas(1.0, 2.0), 1.0);
  EXPECT_NEAR(g.wrt_d, 0.73575888234288467, 1e-12);
}

TEST(ProximityGrad, MatchesCentralFiniteDifferences) {
  Rng rng(47);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ProximityParams p{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 1.5)};
    const double d = rng.uniform(0.01, 10.0);
    const auto g = proximity_grad(p, d);
    const double h = 1e-6;
    auto check = [&](double analytic, double fd) {
      // below ~1e-5 the central-difference rounding floor (~5e-11 absolute)
      // dominates, so compare absolutely there
      if (std::fabs(analytic) < 1e-5 && std::fabs(fd) < 1e-5) {
        EXPECT_LE(std::fabs(analytic - fd), 1e-9);
        return;
      }
      const double denom = std::max(std::fabs(analytic), std::fabs(fd));
      EXPECT_LE(std::fabs(analytic - fd) / denom, 1e-5)
          << "trial " << trial << " analytic=" << analytic << " fd=" << fd;
    };
    check(g.wrt_a, (proximity_eval({p.a + h, p.b}, d) - proximity_eval({p.a - h, p.b}, d)) / (2 * h));
    check(g.wrt_b, (proximity_eval({p.a, p.b + h}, d) - proximity_eval({p.a, p.b - h}, d)) / (2 * h));
    check(g.wrt_d, (proximity_eval(p, d + h) - proximity_eval(p, d - h)) / (2 * h));
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(ProximityParams, ReparameterizationStaysInDomain) {
  for (double a : {-50.0, -1.0, 0.0, 3.0}) {
    for (double b : {-18.0, -1.0, 0.0, 3.0}) {
      const ProximityParams p{a, b};
      EXPECT_GT(p.sigma1(), 0.0);
      EXPECT_GT(p.sigma2(), 1.0);
    }
  }
  // extreme b saturates to sigma2 == 1 in doubles; still a valid evaluation
  const ProximityParams extreme{0.0, -60.0};
  EXPECT_GE(extreme.sigma2(), 1.0);
  EXPECT_EQ(proximity_eval(extreme, 0.0), 0.0);
  EXPECT_GT(proximity_eval(extreme, 0.5), 0.0);
  EXPECT_THROW(ProximityParams::from_sigmas(0.0, 2.0), SpecError);
  EXPECT_THROW(ProximityParams::from_sigmas(1.0, 1.0), SpecError);
}

}  // namespace
