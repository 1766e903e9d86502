#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "kexperts/cover.hpp"

using namespace kexperts;

namespace {

LossFunction constant_phi(std::size_t n, std::size_t t, std::size_t k, double c) {
  return LossFunction::tabulate(n, t, k, [c](std::span<const std::size_t>) { return c; });
}

// (1/2) * (fraction of 1s) + 1/4 over the alphabet {0, 1}
LossFunction half_ones(std::size_t t) {
  return LossFunction::tabulate(2, t, 1, [](std::span<const std::size_t> y) {
    double ones = 0.0;
    for (std::size_t v : y) ones += static_cast<double>(v);
    return 0.5 * ones / static_cast<double>(y.size()) + 0.25;
  });
}

}  // namespace

TEST(SequenceIndex, RoundTrip) {
  for (std::size_t s = 0; s < 81; ++s) EXPECT_EQ(encode_sequence(decode_sequence(s, 3, 4), 3), s);
  EXPECT_EQ(decode_sequence(5, 2, 3), (std::vector<std::size_t>{1, 0, 1}));
  EXPECT_THROW(sequence_count(10, 8), InstanceTooLarge);
}

TEST(PotentialTable, BoundaryAndMeanRecursion) {
  const auto phi = half_ones(3);
  const auto tab = PotentialTable::build(phi);
  EXPECT_EQ(tab.levels[3], phi.values);
  EXPECT_NEAR(tab.phi0(), 0.5, 1e-15);
  const std::vector<std::size_t> one{1};
  EXPECT_NEAR(tab.at(one), 0.5 * (1.0 + 0.5 + 0.5) / 3.0 + 0.25, 1e-15);
}

TEST(StabilityCheck, ConstantPasses) {
  EXPECT_TRUE(stability_check(constant_phi(3, 4, 1, 0.7)).stable);
}

TEST(StabilityCheck, LargeFlipFails) {
  // one coordinate moves phi by 0.6 > 1/T
  auto phi = LossFunction::tabulate(2, 2, 1, [](std::span<const std::size_t> y) { return y[1] == 1 ? 0.8 : 0.2; });
  const auto rep = stability_check(phi);
  EXPECT_FALSE(rep.stable);
  EXPECT_EQ(rep.coordinate, 2u);
  EXPECT_NEAR(rep.excess, 0.3 - 0.25, 1e-12);
}

TEST(StabilityCheck, GeneratedPhiPasses) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 10; ++i) {
    const auto phi = random_stable_phi(3, 4, 1, 0.75, rng);
    EXPECT_TRUE(stability_check(phi).stable);
    double spread = 0.0;
    for (double v : phi.values) spread = std::max(spread, std::abs(v - 0.75));
    EXPECT_GT(spread, 0.0);
  }
}

TEST(AchievabilityCheck, Examples) {
  const auto eq = achievability_check(constant_phi(4, 2, 2, 0.5));
  EXPECT_DOUBLE_EQ(eq.mean, 0.5);
  EXPECT_TRUE(eq.achievable);
  EXPECT_TRUE(achievability_check(constant_phi(4, 2, 2, 0.9)).achievable);
  EXPECT_FALSE(achievability_check(constant_phi(4, 2, 2, 0.4)).achievable);
}

TEST(CoverMarginals, ConstantPhiGivesKOverN) {
  const auto tab = PotentialTable::build(constant_phi(4, 3, 3, 0.5));
  const std::vector<std::size_t> prefix{2, 0};
  const auto m = cover_marginals(tab, prefix);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(m[i], 0.75, 1e-15);
}

TEST(CoverMarginals, HandEnumeratedBinaryCase) {
  const auto tab = PotentialTable::build(half_ones(2));
  const auto m = cover_marginals(tab, {});
  // symbol 1 raises the loss, so it gets the smaller probability
  EXPECT_NEAR(m[1], 0.25, 1e-15);
  EXPECT_NEAR(m[0], 0.75, 1e-15);
}

TEST(CoverMarginals, UnstablePhiIsRejected) {
  auto phi = LossFunction::tabulate(2, 2, 1, [](std::span<const std::size_t> y) { return y[0] == 1 ? 1.0 : 0.0; });
  const auto tab = PotentialTable::build(phi);
  EXPECT_THROW(cover_marginals(tab, {}), FeasibilityViolation);
}

TEST(ExactExpectedLoss, TelescopingIdentity) {
  std::mt19937_64 rng(12);
  for (auto [n, t, k] : {std::tuple<std::size_t, std::size_t, std::size_t>{3, 5, 1}, {2, 6, 1}, {4, 4, 2}}) {
    const double floor = 1.0 - static_cast<double>(k) / static_cast<double>(n);
    for (double level : {floor, floor + 0.1}) {
      const auto phi = random_stable_phi(n, t, k, level, rng);
      const auto tab = PotentialTable::build(phi);
      const double shift = floor - achievability_check(phi).mean;
      for (std::size_t s = 0; s < phi.values.size(); ++s) {
        const auto y = decode_sequence(s, n, t);
        const double mu = exact_expected_loss(tab, y);
        ASSERT_NEAR(mu - phi.values[s], shift, 1e-12);
        ASSERT_LE(mu, phi.values[s] + 1e-12);
      }
    }
  }
}

TEST(ExactExpectedLoss, ConstantPhiAtThreshold) {
  const auto tab = PotentialTable::build(constant_phi(3, 3, 1, 2.0 / 3.0));
  const std::vector<std::size_t> y{0, 2, 2};
  EXPECT_NEAR(exact_expected_loss(tab, y), 2.0 / 3.0, 1e-15);
}

TEST(CoverPlay, FullSetNeverMisses) {
  std::mt19937_64 rng(1);
  const auto tab = PotentialTable::build(constant_phi(3, 4, 3, 0.0));
  const std::vector<std::size_t> y{0, 1, 2, 1};
  for (const auto& r : cover_play(tab, y, rng)) EXPECT_TRUE(r.hit);
}

TEST(CoverPlay, EmpiricalLossMatchesExpectation) {
  std::mt19937_64 rng(2);
  const std::size_t n = 3, t = 6, k = 1;
  const auto phi = random_stable_phi(n, t, k, 2.0 / 3.0, rng);
  const auto tab = PotentialTable::build(phi);
  const std::vector<std::size_t> y{0, 1, 1, 2, 0, 0};
  const double want = exact_expected_loss(tab, y);
  double misses = 0.0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    for (const auto& round : cover_play(tab, y, rng)) misses += round.hit ? 0.0 : 1.0;
  }
  const double got = misses / (reps * static_cast<double>(t));
  EXPECT_NEAR(got, want, 0.01);
}

TEST(CoverPlay, FavouredSymbolGetsMoreMass) {
  // loss falls when symbol 0 is requested, so symbol 0 should be covered more often
  const auto phi = LossFunction::tabulate(3, 3, 1, [](std::span<const std::size_t> y) {
    double s = 0.0;
    for (std::size_t v : y) s += v == 0 ? 0.5 : 0.75;
    return s / 3.0;
  });
  ASSERT_TRUE(stability_check(phi).stable);
  const auto tab = PotentialTable::build(phi);
  const std::vector<std::size_t> prefix{1};
  const auto m = cover_marginals(tab, prefix);
  EXPECT_GT(m[0], m[1]);
  EXPECT_NEAR(m[1], m[2], 1e-15);
}
