#include <gtest/gtest.h>

#include "support.hpp"

using namespace platoon;
using platoon::testing::Gen;

TEST(Pairwise, CleanPairNeverFires) {
  Gen g(1);
  const double mu = 0.1;
  for (int k = 0; k < 20000; ++k) {
    const Vec2 xp = g.vec(100.0), xi = g.vec(100.0);
    const Vec2 y_rel = xi - xp + g.in_ball(mu);
    EXPECT_FALSE(pairwise_check(y_rel, xp + g.in_ball(mu), xi + g.in_ball(mu), mu));
  }
}

TEST(Pairwise, Examples) {
  const Vec2 xp(1, 2), xi(5, 3);
  EXPECT_TRUE(pairwise_check(xi - xp, xp, xi + Vec2(10, 0), 0.1));
  // Equal bias on both sensors cancels: the stealthy case.
  EXPECT_FALSE(pairwise_check(xi - xp, xp + Vec2(4, 4), xi + Vec2(4, 4), 0.1));
  // Exactly at the threshold does not fire.
  EXPECT_FALSE(pairwise_check(Vec2(0, 0), Vec2(0, 0), Vec2(0.3, 0), 0.1));
}

TEST(Innovation, Examples) {
  const double nA = Plant(0.01).norm();
  const Vec2 pred(10, 1);
  EXPECT_TRUE(innovation_check(pred + Vec2(10, 0), pred, 0.5, 0.0, 0.0, nA));
  const double g = innovation_threshold(0.5, 0.1, 0.1, nA);
  EXPECT_DOUBLE_EQ(g, 0.2 + nA * 0.5);
  EXPECT_FALSE(innovation_check(pred + Vec2(0.99 * g, 0), pred, 0.5, 0.1, 0.1, nA));
  EXPECT_FALSE(innovation_check(pred + Vec2(g, 0), pred, 0.5, 0.1, 0.1, nA));
  EXPECT_TRUE(innovation_check(pred + Vec2(1.01 * g, 0), pred, 0.5, 0.1, 0.1, nA));
}

TEST(Innovation, CleanSensorWithSoundBoundNeverFires) {
  Gen g(2);
  const double T = 0.01, eps = 0.1, mu = 0.1;
  const Plant plant(T);
  for (int k = 0; k < 20000; ++k) {
    const Vec2 x_prev = g.vec(100.0);
    const double alpha = g.log_real(1e-3, 100.0);
    const Vec2 x_hat_prev = x_prev + g.in_ball(alpha);
    const double u = g.real(-50, 50);
    const Vec2 x = plant.advance(x_prev, u, g.in_ball(eps));
    const Vec2 pred = plant.advance(x_hat_prev, u, Vec2::Zero());
    EXPECT_FALSE(innovation_check(x + g.in_ball(mu), pred, alpha, eps, mu, plant.norm()));
  }
}

TEST(Split, WorkedExample) {
  const auto runs = split_suspicious(IndexSet{1, 2, 3, 6, 9, 10, 11, 12, 15});
  ASSERT_EQ(runs.size(), 4u);
  EXPECT_EQ(runs[0], (IndexSet{1, 2, 3}));
  EXPECT_EQ(runs[1], (IndexSet{6}));
  EXPECT_EQ(runs[2], (IndexSet{9, 10, 11, 12}));
  EXPECT_EQ(runs[3], (IndexSet{15}));
  EXPECT_EQ(min_attacked_count(runs), 5);
  EXPECT_TRUE(split_suspicious({}).empty());
  EXPECT_EQ(split_suspicious(IndexSet{4}).size(), 1u);
}

TEST(Split, Counting) {
  EXPECT_EQ(min_attacked_count({IndexSet{1, 2, 3}}), 1);
  EXPECT_EQ(min_attacked_count({IndexSet{1, 2, 3, 4}}), 2);
  const auto runs = split_suspicious(IndexSet{1, 3, 5});
  EXPECT_EQ(min_attacked_count(runs), 3);
  EXPECT_TRUE(saturation_check(min_attacked_count(runs), 3));
  EXPECT_FALSE(saturation_check(2, 3));
}

TEST(Split, PartitionProperty) {
  Gen g(3);
  for (int k = 0; k < 1000; ++k) {
    const int n = g.integer(1, 30);
    const IndexSet s = g.subset(n, g.integer(0, n));
    IndexSet joined;
    const auto runs = split_suspicious(s);
    for (std::size_t r = 0; r < runs.size(); ++r) {
      EXPECT_FALSE(runs[r].empty());
      EXPECT_EQ(static_cast<int>(runs[r].size()), runs[r].back() - runs[r].front() + 1);
      if (r > 0) EXPECT_GT(runs[r].front(), runs[r - 1].back() + 1);
      joined |= runs[r];
    }
    EXPECT_EQ(joined, s);
  }
}

namespace {

DetectorInput clean_input(Index i, int N, int b) {
  DetectorInput d;
  d.i = i;
  d.N = N;
  d.b = b;
  d.mu = 0.1;
  d.epsilon = 0.1;
  d.normA = Plant(0.01).norm();
  d.y_abs = Vec2(10, 1);
  d.prediction = Vec2(10, 1);
  d.bound_prev = 0.5;
  if (i >= 2) {
    d.y_rel = Vec2(2, 0);
    d.y_abs_prev = Vec2(8, 1);
  }
  return d;
}

}  // namespace

TEST(DetectorStep, NoAttackNoFalseAlarm) {
  for (Index i = 1; i <= 5; ++i) {
    const auto out = detector_step(clean_input(i, 5, 1), {});
    EXPECT_EQ(out.sets, DetectionSets{});
    EXPECT_FALSE(out.fired.pairwise || out.fired.innovation || out.fired.exhaustion || out.fired.completion);
  }
}

TEST(DetectorStep, BiasOnThirdSensorHandTrace) {
  // Vehicle 3 sees its own sensor biased by (10, 0): the pairwise rule fires
  // and suspects {2, 3}; the innovation rule confirms 3; exhaustion then counts
  // one attacker in the run {2, 3} and trusts {1, 4, 5}; completion trusts
  // everything but 3.
  auto d = clean_input(3, 5, 1);
  d.y_abs += Vec2(10, 0);
  const auto out = detector_step(d, {});
  EXPECT_TRUE(out.fired.pairwise);
  EXPECT_TRUE(out.fired.innovation);
  EXPECT_TRUE(out.fired.exhaustion);
  EXPECT_TRUE(out.fired.completion);
  EXPECT_EQ(out.sets.attacked, IndexSet{3});
  EXPECT_EQ(out.sets.trusted, (IndexSet{1, 2, 4, 5}));
  EXPECT_TRUE(out.sets.suspected.empty());

  // Vehicle 4 the same step only sees the pairwise inconsistency with 3.
  auto d4 = clean_input(4, 5, 1);
  d4.y_abs_prev = *d4.y_abs_prev + Vec2(10, 0);
  const auto o4 = detector_step(d4, {});
  EXPECT_TRUE(o4.fired.pairwise);
  EXPECT_FALSE(o4.fired.innovation);
  EXPECT_EQ(o4.sets.trusted, (IndexSet{1, 2, 5}));
  EXPECT_EQ(o4.sets.suspected, (IndexSet{3, 4}));
  // Next step vehicle 4 fuses vehicle 3's confirmation.
  const DetectionSets fused = fuse_sets(o4.sets, {out.sets});
  const auto next = detector_step(clean_input(4, 5, 1), fused);
  EXPECT_EQ(next.sets.attacked, IndexSet{3});
  EXPECT_EQ(next.sets.trusted, (IndexSet{1, 2, 4, 5}));
}

TEST(DetectorStep, CompletionFromFusedInput) {
  const auto out = detector_step(clean_input(2, 6, 2), DetectionSets{{}, {1, 5}, {}});
  EXPECT_TRUE(out.fired.completion);
  EXPECT_EQ(out.sets.trusted, (IndexSet{2, 3, 4, 6}));
}

TEST(DetectorStep, PairwiseConfirmsTheUntrustedSide) {
  auto d = clean_input(3, 7, 2);
  d.y_abs += Vec2(5, 0);
  d.bound_prev = 100.0;  // innovation rule cannot fire
  auto out = detector_step(d, DetectionSets{{2}, {}, {}});
  EXPECT_EQ(out.sets.attacked, IndexSet{3});
  d = clean_input(3, 7, 2);
  d.y_abs_prev = *d.y_abs_prev + Vec2(5, 0);
  out = detector_step(d, DetectionSets{{3}, {}, {}});
  EXPECT_EQ(out.sets.attacked, IndexSet{2});
}

TEST(DetectorStep, GuardSkipsPairsWithConfirmedAttack) {
  auto d = clean_input(3, 7, 2);
  d.y_abs_prev = *d.y_abs_prev + Vec2(5, 0);
  const auto out = detector_step(d, DetectionSets{{}, {2}, {}});
  EXPECT_FALSE(out.fired.pairwise);
  EXPECT_TRUE(out.sets.suspected.empty());
}

// Unit-level fault-freeness: random admissible inputs built from a ground
// truth, with a sound bound. Confirmed sets must never contradict the truth.
TEST(DetectorStep, FaultFreeOnRandomInputs) {
  Gen g(4);
  const Plant plant(0.01);
  for (int trial = 0; trial < 20000; ++trial) {
    const int N = g.integer(3, 10);
    const int b = g.integer(1, (N - 1) / 2);
    const IndexSet truth = g.subset(N, g.integer(0, b));
    const IndexSet clean = IndexSet::range(1, N) - truth;
    const Index i = g.integer(1, N);
    const double mu = g.real(0.0, 0.3), eps = g.real(0.0, 0.3), alpha = g.log_real(1e-2, 50.0);
    std::vector<Vec2> x(static_cast<std::size_t>(N + 1)), y(static_cast<std::size_t>(N + 1));
    for (Index k = 1; k <= N; ++k) {
      x[static_cast<std::size_t>(k)] = g.vec(100.0);
      Vec2 a = Vec2::Zero();
      if (truth.contains(k)) a = g.coin() ? g.direction(g.log_real(1e-3, 1e3)) : Vec2::Zero();
      y[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] + a + g.in_ball(mu);
    }
    DetectorInput d;
    d.i = i;
    d.N = N;
    d.b = b;
    d.mu = mu;
    d.epsilon = eps;
    d.normA = plant.norm();
    d.y_abs = y[static_cast<std::size_t>(i)];
    // Prediction consistent with a sound previous bound.
    d.prediction = x[static_cast<std::size_t>(i)] + g.in_ball(eps + plant.norm() * alpha);
    d.bound_prev = alpha;
    if (i >= 2) {
      d.y_rel = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i - 1)] + g.in_ball(mu);
      d.y_abs_prev = y[static_cast<std::size_t>(i - 1)];
    }
    DetectionSets in;
    in.attacked = g.subset(N, g.integer(0, static_cast<int>(truth.size()))) & truth;
    in.trusted = g.subset(N, g.integer(0, N)) & clean;
    const auto out = detector_step(d, in);
    EXPECT_TRUE(truth.includes(out.sets.attacked)) << trial;
    EXPECT_TRUE(out.sets.trusted.disjoint(truth)) << trial;
    EXPECT_TRUE(out.sets.trusted.includes(in.trusted));
    EXPECT_TRUE(out.sets.attacked.includes(in.attacked));
    if (out.fired.exhaustion) EXPECT_TRUE(out.sets.trusted.disjoint(truth));
  }
}
