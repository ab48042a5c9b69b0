#include <gtest/gtest.h>

#include <random>
#include <utility>
#include <vector>

#include "sbd/chain.hpp"

using namespace sbd;

namespace {

ChainState make(Count n1, std::vector<std::pair<Count, Count>> clusters) {
  return ChainState::from_counts(n1, clusters);
}

EpsilonFamily family(double eps, double a0, double b0, double alpha, double beta) {
  EpsilonFamily fam(RateModel{constant_law(a0), constant_law(b0), alpha, beta}, eps);
  return fam;
}

double rate_at(const std::vector<SizeRate>& rates, Count size) {
  for (auto r : rates)
    if (r.size == size) return r.rate;
  return 0.0;
}

}  // namespace

TEST(Propensities, RescaledNucleationOnly) {
  auto p = propensities_rescaled(ChainState::pure_monomer(100), family(0.1, 1.0, 2.0, 1.0, 1.0));
  EXPECT_NEAR(p.nucleation, 9.9, 1e-12);  // 1e-3 * 100 * 99
  EXPECT_EQ(p.denucleation, 0.0);
  EXPECT_EQ(p.aggregation_total, 0.0);
  EXPECT_EQ(p.fragmentation_total, 0.0);
}

TEST(Propensities, NoNucleationWithFewerThanTwoMonomers) {
  auto fam = family(0.1, 1.0, 2.0, 5.0, 1.0);
  EXPECT_EQ(propensities_rescaled(ChainState::pure_monomer(0), fam).nucleation, 0.0);
  EXPECT_EQ(propensities_rescaled(ChainState::pure_monomer(1), fam).nucleation, 0.0);
}

TEST(Propensities, RescaledFragmentationAtSizeThree) {
  auto p = propensities_rescaled(make(10, {{3, 4}}), family(0.1, 1.0, 2.0, 1.0, 1.0));
  EXPECT_NEAR(rate_at(p.fragmentation, 3), 80.0, 1e-12);  // 2 * 4 / 0.1
  EXPECT_NEAR(rate_at(p.aggregation, 3), 1.0 * 0.1 * 10 * 4, 1e-12);
  EXPECT_NEAR(p.fragmentation_total + p.aggregation_total, 84.0, 1e-12);
}

TEST(Propensities, RawMassAction) {
  RawCoefficients c{[](Count i) { return i == 5 ? 0.5 : 1.0; }, [](Count) { return 1.0; }, 1.0, 3.0};
  EXPECT_EQ(propensities_raw(ChainState::pure_monomer(2), c).nucleation, 2.0);
  EXPECT_EQ(propensities_raw(make(10, {{5, 3}}), c).denucleation, 0.0);
  EXPECT_EQ(rate_at(propensities_raw(make(10, {{5, 3}}), c).aggregation, 5), 15.0);
  EXPECT_EQ(propensities_raw(make(10, {{2, 2}}), c).denucleation, 6.0);
}

TEST(Propensities, NonFiniteRateIsRejected) {
  RawCoefficients c{[](Count) { return std::numeric_limits<double>::infinity(); }, [](Count) { return 1.0; }, 1.0, 1.0};
  try {
    propensities_raw(make(3, {{2, 1}}), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
  }
}

TEST(ApplyEvent, JumpDefinitions) {
  auto s = apply_event(make(5, {{2, 1}}), {EventKind::Denucleation, 2});
  EXPECT_EQ(s.monomers(), 7);
  EXPECT_EQ(s.count(2), 0);
  EXPECT_EQ(s.cluster_number(), 0);

  auto before = make(5, {{4, 2}});
  auto after = apply_event(before, {EventKind::Aggregation, 4});
  EXPECT_EQ(after.monomers(), 4);
  EXPECT_EQ(after.count(4), 1);
  EXPECT_EQ(after.count(5), 1);
  EXPECT_EQ(after.total_mass(), before.total_mass());
  EXPECT_TRUE(after.mass_identity_holds());

  auto frag = apply_event(make(3, {{3, 1}}), {EventKind::Fragmentation, 3});
  EXPECT_EQ(frag.monomers(), 4);
  EXPECT_EQ(frag.count(3), 0);
  EXPECT_EQ(frag.count(2), 1);

  auto nuc = apply_event(ChainState::pure_monomer(4), {EventKind::Nucleation, 2});
  EXPECT_EQ(nuc.monomers(), 2);
  EXPECT_EQ(nuc.count(2), 1);
}

TEST(ApplyEvent, ImpossibleJumpsReportNegativeCount) {
  auto expect_negative = [](ChainState s, Event e) {
    try {
      apply_event(std::move(s), e);
      FAIL();
    } catch (const Error& err) {
      EXPECT_EQ(err.kind(), ErrorKind::NegativeCount);
    }
  };
  expect_negative(ChainState::pure_monomer(1), {EventKind::Nucleation, 2});
  expect_negative(make(5, {}), {EventKind::Denucleation, 2});
  expect_negative(make(0, {{3, 1}}), {EventKind::Aggregation, 3});
  expect_negative(make(5, {{2, 1}}), {EventKind::Fragmentation, 2});
  expect_negative(make(5, {{4, 1}}), {EventKind::Fragmentation, 3});
}

TEST(ApplyEvent, RandomWalkConservesMass) {
  std::mt19937_64 gen(3);
  auto s = ChainState::pure_monomer(500);
  const EventKind kinds[] = {EventKind::Nucleation, EventKind::Denucleation, EventKind::Aggregation,
                             EventKind::Fragmentation};
  int applied = 0;
  for (int step = 0; step < 20000; ++step) {
    Event e{kinds[gen() % 4], static_cast<Count>(2 + gen() % 12)};
    try {
      EventApplier::apply(s, e);
      ++applied;
    } catch (const Error&) {
      // rejected jumps must leave the state untouched
    }
    ASSERT_TRUE(s.mass_identity_holds());
    ASSERT_EQ(s.total_mass(), 500);
  }
  EXPECT_GT(applied, 1000);
}

TEST(SnapshotMeasure, RescalingArithmetic) {
  auto mu = snapshot_measure(make(50, {{2, 3}}), 0.1);
  EXPECT_DOUBLE_EQ(mu.u, 0.5);
  ASSERT_EQ(mu.atoms.size(), 1u);
  EXPECT_DOUBLE_EQ(mu.atoms[0].x, 0.2);
  EXPECT_DOUBLE_EQ(mu.atoms[0].weight, 0.30000000000000004);
  EXPECT_DOUBLE_EQ(mu.m, 0.56);
  EXPECT_DOUBLE_EQ(mu.number(), 0.1 * 3);
}

TEST(SnapshotMeasure, EmptyMeasureHasUEqualM) {
  auto mu = snapshot_measure(ChainState::pure_monomer(400), 0.05);
  EXPECT_TRUE(mu.atoms.empty());
  EXPECT_EQ(mu.u, mu.m);
}

TEST(SnapshotMeasure, IdentityFromIntegersIsExact) {
  const double eps = 0.037;
  auto mu = snapshot_measure(make(1234, {{2, 7}, {3, 11}, {19, 2}, {200, 1}}), eps);
  const double eps2 = eps * eps;
  EXPECT_EQ(eps2 * static_cast<double>(mu.monomers + mu.cluster_mass), mu.m);
  EXPECT_EQ(mu.cluster_number, 21);
  EXPECT_DOUBLE_EQ(mu.pair([](double) { return 1.0; }), mu.number());
}

TEST(Occupation, ZeroWhenNoSizeTwoClusters) {
  OccupationAccumulator acc(0.1, 0.0, 1.0);
  acc = accumulate_occupation(acc, make(5, {{3, 1}}), 1.0);
  EXPECT_EQ(acc.sum(0), 0.0);
  EXPECT_NEAR(acc.sum(1), 0.1, 1e-15);
}

TEST(Occupation, ConstantIntegrand) {
  OccupationAccumulator acc(0.1, 0.0, 2.0, 32, 4);
  auto s = make(5, {{2, 1}});
  acc = accumulate_occupation(acc, s, 2.0);
  EXPECT_NEAR(acc.sum(0), 0.2, 1e-15);
  for (std::size_t b = 0; b < 4; ++b) EXPECT_NEAR(acc.batch_average(b, 0), 0.1, 1e-15);
}

TEST(Occupation, ClipsToWindowAndIsMonotone) {
  OccupationAccumulator acc(0.5, 1.0, 3.0, 4, 3);
  auto s = make(5, {{2, 2}, {4, 1}});
  double prev = 0.0;
  for (double t = 0.0; t < 4.0; t += 0.25) {
    acc.accumulate(s, t, t + 0.25);
    EXPECT_GE(acc.sum(0), prev);
    prev = acc.sum(0);
    // bounded by elapsed window time times <mu, 1>
    double elapsed = std::clamp(t + 0.25, 1.0, 3.0) - 1.0;
    EXPECT_LE(acc.sum(0) + acc.sum(2), elapsed * 0.5 * 3 + 1e-12);
  }
  EXPECT_NEAR(acc.sum(0), 2.0 * 0.5 * 2, 1e-12);
  EXPECT_NEAR(acc.sum(2), 2.0 * 0.5 * 1, 1e-12);
}
