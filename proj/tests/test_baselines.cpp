#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "kexperts/baselines.hpp"
#include "kexperts/esp.hpp"

using namespace kexperts;

namespace {

std::vector<std::size_t> run(std::vector<std::size_t> reqs, std::size_t n, std::size_t k, bool lfu,
                             LfuMode mode = LfuMode::Perfect) {
  auto s = CacheState::empty(n, k);
  for (std::size_t r : reqs) lfu ? lfu_step(s, r, mode) : lru_step(s, r);
  return s.resident;
}

}  // namespace

TEST(Lru, EvictsLeastRecentlyUsed) {
  EXPECT_EQ(run({0, 1, 0, 2}, 5, 2, false), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(run({3, 3, 3, 3}, 5, 2, false), (std::vector<std::size_t>{3}));
}

TEST(Lru, PredictionIsResidencyBeforeRequest) {
  auto s = CacheState::empty(4, 2);
  EXPECT_TRUE(lru_step(s, 1).members.empty());
  EXPECT_EQ(lru_step(s, 2).members, (std::vector<std::size_t>{1}));
  EXPECT_EQ(lru_step(s, 3).members, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(s.resident, (std::vector<std::size_t>{2, 3}));
}

TEST(Lfu, KeepsTheFrequentItem) {
  EXPECT_EQ(run({0, 0, 1, 2}, 5, 2, true), (std::vector<std::size_t>{0, 2}));
}

TEST(Lfu, OnePassIsFifo) {
  EXPECT_EQ(run({0, 1, 2, 3, 4}, 6, 3, true), (std::vector<std::size_t>{2, 3, 4}));
}

TEST(Lfu, PerfectModeRemembersEvictedCounts) {
  // 1 is requested twice, evicted, then requested again: perfect LFU keeps
  // its history and evicts 2 instead.
  const std::vector<std::size_t> reqs{1, 1, 0, 0, 0, 2, 2, 2, 3, 1, 4};
  EXPECT_EQ(run(reqs, 5, 2, true, LfuMode::Perfect), (std::vector<std::size_t>{1, 4}));
  EXPECT_EQ(run(reqs, 5, 2, true, LfuMode::InCache), (std::vector<std::size_t>{2, 4}));
}

TEST(Caches, NoEvictionsWhenKEqualsN) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, 5);
  for (bool lfu : {false, true}) {
    auto s = CacheState::empty(6, 6);
    for (int t = 0; t < 200; ++t) {
      const std::size_t y = pick(rng);
      const auto before = s.resident;
      lfu ? lfu_step(s, y) : lru_step(s, y);
      for (std::size_t v : before) EXPECT_TRUE(s.contains(v));
    }
  }
}

TEST(Caches, DeterministicAndBounded) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, 19);
  std::vector<std::size_t> reqs(500);
  for (auto& r : reqs) r = pick(rng);
  for (bool lfu : {false, true}) {
    auto a = CacheState::empty(20, 4);
    auto b = CacheState::empty(20, 4);
    for (std::size_t r : reqs) {
      const auto pa = lfu ? lfu_step(a, r) : lru_step(a, r);
      const auto pb = lfu ? lfu_step(b, r) : lru_step(b, r);
      EXPECT_EQ(pa, pb);
      EXPECT_LE(a.resident.size(), 4u);
    }
    EXPECT_EQ(a.resident.size(), 4u);
  }
}

TEST(Ftpl, TinyNoiseIsTopK) {
  std::mt19937_64 rng(3);
  const std::vector<double> r{5, 1, 9, 3, 7};
  EXPECT_EQ(ftpl_predict(r, 1e-9, 2, rng).members, (std::vector<std::size_t>{2, 4}));
  EXPECT_THROW(ftpl_predict(r, 0.0, 2, rng), ConfigError);
}

TEST(Ftpl, EqualScoresAreUniform) {
  std::mt19937_64 rng(4);
  const std::size_t n = 10, k = 3;
  const std::vector<double> r(n, 2.0);
  std::vector<double> freq(n, 0.0);
  const int reps = 40000;
  for (int i = 0; i < reps; ++i) {
    for (std::size_t v : ftpl_predict(r, 1.0, k, rng).members) freq[v] += 1.0;
  }
  for (double f : freq) EXPECT_NEAR(f / reps, 0.3, 0.01);
}

TEST(Ftpl, DominantScoreAlmostAlwaysPicked) {
  std::mt19937_64 rng(5);
  std::vector<double> r(10, 0.0);
  r[7] = 30.0;
  int hits = 0;
  for (int i = 0; i < 5000; ++i) hits += ftpl_predict(r, 3.0, 2, rng).contains(7) ? 1 : 0;
  EXPECT_GE(hits, 4990);
}

TEST(ExpandedHedge, ZeroEtaIsUniform) {
  const auto h = expanded_hedge_oracle(std::vector<std::size_t>{0, 1, 1}, 0.0, 5, 2);
  EXPECT_EQ(h.sets.size(), 10u);
  for (double p : h.marginals) EXPECT_NEAR(p, 0.4, 1e-15);
}

TEST(ExpandedHedge, HandEnumeratedCase) {
  const auto h = expanded_hedge_oracle(std::vector<std::size_t>{0}, std::log(2.0), 3, 2);
  EXPECT_NEAR(h.marginals[0], 0.8, 1e-15);
  EXPECT_NEAR(h.marginals[1], 0.6, 1e-15);
  EXPECT_NEAR(h.marginals[2], 0.6, 1e-15);
  EXPECT_NEAR(h.probs[0], 0.4, 1e-15);
}

TEST(ExpandedHedge, SingleRoundDependsOnlyOnHit) {
  const auto h = expanded_hedge_oracle(std::vector<std::size_t>{2}, 0.9, 5, 2);
  double with = -1.0, without = -1.0;
  for (std::size_t s = 0; s < h.sets.size(); ++s) {
    const bool has = std::find(h.sets[s].begin(), h.sets[s].end(), 2u) != h.sets[s].end();
    double& slot = has ? with : without;
    if (slot < 0.0) slot = h.probs[s];
    EXPECT_NEAR(h.probs[s], slot, 1e-15);
  }
  EXPECT_NEAR(with / without, std::exp(0.9), 1e-12);
}

TEST(ExpandedHedge, AgreesWithEspMarginalsAndIsFeasible) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> pick(0, 9);
  std::vector<std::size_t> history(30);
  for (auto& y : history) y = pick(rng);
  const auto h = expanded_hedge_oracle(history, 0.5, 10, 4);
  WeightVector w = WeightVector::unit(10);
  for (std::size_t y : history) w.log_weights[y] += 0.5;
  const auto m = hedge_marginals(w, 4);
  double total = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_NEAR(h.marginals[i], m[i], 1e-9);
    EXPECT_GE(h.marginals[i], 0.0);
    EXPECT_LE(h.marginals[i], 1.0 + 1e-12);
    total += h.marginals[i];
  }
  EXPECT_NEAR(total, 4.0, 1e-9);
  EXPECT_THROW(expanded_hedge_oracle({}, 0.1, 40, 10), InstanceTooLarge);
}

TEST(Ftpl, DefaultSigma) {
  EXPECT_NEAR(ftpl_default_sigma(10000, 50, 5), std::sqrt(10000.0 / (5.0 * (std::log(10.0) + 1.0))), 1e-12);
}
