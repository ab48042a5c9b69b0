#include <gtest/gtest.h>

#include <cmath>

#include "sbd/moments.hpp"

using namespace sbd;

namespace {
MomentParams fig1() { return {1.0, 2.0, 1.0, 3.0}; }
}  // namespace

TEST(MomentRhs, InitialSlope) {
  auto d = moment_rhs(MomentState{0.0, 0.0, 0.0, 3.0}, fig1());
  EXPECT_EQ(d.dN, 9.0);
  EXPECT_EQ(d.dP, 0.0);
}

TEST(MomentRhs, RegimeExitAtOrBelowRho) {
  try {
    moment_rhs(MomentState{0.0, 1.0, 1.0, 2.0}, fig1());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RegimeExit);
  }
}

TEST(IntegrateMoments, NoNucleationIsConstant) {
  auto s = integrate_moments(MomentState{0.0, 0.0, 0.0, 3.0}, {1.0, 2.0, 0.0, 3.0}, 1.0, 0.1);
  ASSERT_EQ(s.rows.size(), 11u);
  for (const auto& r : s.rows) {
    EXPECT_EQ(r.N, 0.0);
    EXPECT_EQ(r.u, 3.0);
  }
}

TEST(IntegrateMoments, Fig1MonotoneAndClosed) {
  auto s = integrate_moments(MomentState{0.0, 0.0, 0.0, 3.0}, fig1(), 1.0, 1.0 / 64);
  EXPECT_FALSE(s.crossing_time.has_value());
  for (std::size_t k = 1; k < s.rows.size(); ++k) {
    EXPECT_LT(s.rows[k].u, s.rows[k - 1].u);
    EXPECT_GE(s.rows[k].N, s.rows[k - 1].N);
    EXPECT_EQ(s.rows[k].u, 3.0 - s.rows[k].P);
    EXPECT_GT(s.rows[k].u, 2.0);
  }
}

// With b0 = 0 and alpha = 0 the system is linear: P' = a0 (m - P) N0, so
// u(t) = m e^{-a0 N0 t} exactly.
TEST(IntegrateMoments, MatchesExponentialSolution) {
  MomentParams p{2.0, 0.0, 0.0, 3.0};
  auto s = integrate_moments(MomentState{0.0, 0.5, 0.0, 3.0}, p, 2.0, 0.25);
  for (const auto& r : s.rows) EXPECT_NEAR(r.u, 3.0 * std::exp(-1.0 * r.t), 1e-9);
}

// u' = -(a0 u - b0) N only approaches rho, so an exit is seen when the
// start is already at rho.
TEST(IntegrateMoments, StartAtRhoIsRegimeExit) {
  auto s = integrate_moments(MomentState{0.0, 1.0, 3.0, 0.0}, {1.0, 0.0, 1.0, 3.0}, 1.0, 0.1);
  EXPECT_TRUE(s.regime_exit);
  ASSERT_TRUE(s.crossing_time.has_value());
  EXPECT_EQ(*s.crossing_time, 0.0);
}

TEST(MomentParams, RejectsSizeDependentRates) {
  RateModel m{linear_law(0.0, 1.0), constant_law(1.0), 1.0, 1.0};
  EXPECT_THROW(moment_params(m, 3.0), Error);
  RateModel c{constant_law(1.0), constant_law(2.0), 1.0, 1.0};
  auto p = moment_params(c, 3.0);
  EXPECT_EQ(p.rho(), 2.0);
}
