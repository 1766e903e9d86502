#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "kexperts/harness.hpp"

using namespace kexperts;

namespace {

Trace counts_trace(const std::vector<std::size_t>& counts) {
  std::vector<std::size_t> items;
  for (std::size_t i = 0; i < counts.size(); ++i) items.insert(items.end(), counts[i], i);
  return make_onehot_trace(counts.size(), items);
}

ExperimentConfig config(PolicyKind p, std::size_t n, std::size_t k, std::size_t t, std::uint64_t seed) {
  ExperimentConfig c;
  c.policy = p;
  c.n = n;
  c.k = k;
  c.t = t;
  c.seed = seed;
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(OracleSum, TopKCounts) {
  const auto r = oracle_sum(counts_trace({5, 3, 3, 1}), 2);
  EXPECT_DOUBLE_EQ(r.value, 8.0);
  EXPECT_EQ(r.set.members, (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(oracle_sum(counts_trace({2, 2, 2, 2, 2}), 3).value, 6.0);
}

TEST(OracleSum, MatchesBruteForceOnDenseTraces) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto tr = gen_bernoulli_ensemble(10, 40, 0.3, rng);
    for (std::size_t k : {1u, 3u, 6u}) {
      EXPECT_NEAR(oracle_sum(tr, k).value, oracle_bruteforce(tr, Variant::Sum, k).value, 1e-9);
    }
  }
  const auto oh = gen_zipf_onehot(12, 200, 0.7, rng);
  EXPECT_NEAR(oracle_sum(oh, 4).value, oracle_bruteforce(oh, Variant::Sum, 4).value, 1e-9);
}

TEST(OracleBruteforce, MaxRewardWithRepeatedItem) {
  const std::vector<std::size_t> reqs(30, 4);
  const auto tr = gen_distance_reward(8, reqs);
  const auto r = oracle_bruteforce(tr, Variant::Max, 3);
  EXPECT_DOUBLE_EQ(r.value, 30.0);
  EXPECT_TRUE(r.set.contains(4));
}

TEST(OracleBruteforce, TrianglePairs) {
  Trace tr;
  tr.n = 3;
  tr.kind = RoundKind::Pair;
  for (int cycle = 0; cycle < 4; ++cycle) {
    for (auto e : {std::pair<std::size_t, std::size_t>{0, 1}, {1, 2}, {0, 2}}) {
      tr.pairs.push_back(e);
      tr.timestamps.push_back(static_cast<long long>(tr.timestamps.size()));
    }
  }
  EXPECT_DOUBLE_EQ(oracle_bruteforce(tr, Variant::Pair, 2).value, 4.0);
  EXPECT_THROW(oracle_bruteforce(gen_distance_reward(40, std::vector<std::size_t>(100, 0)), Variant::Max, 20),
               InstanceTooLarge);
}

TEST(OraclePartition, LowerBoundsBruteForce) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + static_cast<std::size_t>(trial % 7);
    const auto tr = gen_bernoulli_ensemble(n, 60, 0.2, rng);
    for (std::size_t k = 1; k <= 4; ++k) {
      EXPECT_LE(oracle_partition_lowerbound(tr, k).value, oracle_bruteforce(tr, Variant::Max, k).value + 1e-12);
    }
    EXPECT_DOUBLE_EQ(oracle_partition_lowerbound(tr, 1).value, oracle_bruteforce(tr, Variant::Max, 1).value);
  }
  Trace same;
  same.n = 6;
  same.kind = RoundKind::Dense;
  for (int t = 0; t < 10; ++t) {
    same.timestamps.push_back(t);
    same.dense.push_back(std::vector<double>(6, t % 2 ? 1.0 : 0.25));
  }
  EXPECT_DOUBLE_EQ(oracle_partition_lowerbound(same, 3).value, oracle_bruteforce(same, Variant::Max, 3).value);
}

TEST(BoundTable, Values) {
  const auto tab = bound_table(50, 5, 1e4);
  EXPECT_NEAR(bound_named(tab, "sage_hedge").value, 574.7, 0.05);
  EXPECT_NEAR(bound_named(tab, "sage_ftrl").value, 2.0 * std::sqrt(2.0 * 5 * 1e4 * std::log(10.0)), 1e-9);
  EXPECT_NEAR(bound_named(tab, "component_hedge").value, std::sqrt(2.0 * 5 * 1e4 * std::log(10.0)), 1e-9);
  EXPECT_NEAR(bound_named(tab, "ftpl_gaussian").value, 2.0 * std::sqrt(2.0 * 1e4 * 5 * std::log(2118760.0)), 1e-6);
  EXPECT_NEAR(bound_named(tab, "lower_bound_sum").value, std::sqrt(5e4 / (2.0 * std::numbers::pi)), 1e-9);
  EXPECT_TRUE(bound_named(tab, "lower_bound_sum").applicable);

  const auto lb = bound_table(35, 5, 2000);
  EXPECT_NEAR(bound_named(lb, "lower_bound_max").value, 2.79, 0.005);
  EXPECT_TRUE(bound_named(lb, "lower_bound_max").applicable);
  EXPECT_FALSE(bound_named(bound_table(30, 5, 2000), "lower_bound_max").applicable);
  EXPECT_FALSE(bound_named(bound_table(35, 5, 100), "lower_bound_max").applicable);
  EXPECT_FALSE(bound_named(bound_table(9, 5, 100), "lower_bound_sum").applicable);
  EXPECT_THROW(bound_named(tab, "nope"), ConfigError);
  EXPECT_THROW(bound_table(5, 6, 10), ConfigError);
}

TEST(RunExperiment, RowsSatisfyBookkeeping) {
  std::mt19937_64 rng(3);
  const auto tr = gen_zipf_onehot(20, 500, 0.8, rng);
  for (auto p : {PolicyKind::SageHedge, PolicyKind::Ftrl, PolicyKind::Lru, PolicyKind::Lfu, PolicyKind::Ftpl}) {
    const auto rec = run_experiment(config(p, 20, 3, 500, 9), tr);
    ASSERT_EQ(rec.rows.size(), 500u);
    double cum = 0.0;
    for (const auto& row : rec.rows) {
      cum += row.expected_reward;
      EXPECT_NEAR(row.cum_reward, cum, 1e-9);
      EXPECT_DOUBLE_EQ(row.regret, row.oracle_cum - row.cum_reward);
      EXPECT_DOUBLE_EQ(row.normalized_regret, row.regret / static_cast<double>(row.t));
    }
    EXPECT_DOUBLE_EQ(rec.rows.back().oracle_cum, rec.oracle_value);
    EXPECT_GE(rec.hit_rate, 0.0);
    EXPECT_LE(rec.hit_rate, 1.0);
  }
}

TEST(RunExperiment, FullSetHasNoRegret) {
  std::mt19937_64 rng(4);
  const auto tr = gen_zipf_onehot(6, 300, 1.0, rng);
  for (auto p : {PolicyKind::SageHedge, PolicyKind::Ftrl, PolicyKind::Ftpl}) {
    const auto rec = run_experiment(config(p, 6, 6, 300, 1), tr);
    EXPECT_NEAR(rec.final_regret, 0.0, 1e-9);
    EXPECT_DOUBLE_EQ(rec.hit_rate, 1.0);
  }
  const auto small = gen_zipf_onehot(3, 6, 1.0, rng);
  EXPECT_NEAR(run_experiment(config(PolicyKind::Cover, 3, 3, 6, 1), small).final_regret, 0.0, 1e-12);
  // caches start empty, so each distinct item costs one cold miss
  std::set<std::size_t> distinct(tr.items.begin(), tr.items.end());
  for (auto p : {PolicyKind::Lru, PolicyKind::Lfu}) {
    EXPECT_DOUBLE_EQ(run_experiment(config(p, 6, 6, 300, 1), tr).final_regret,
                     static_cast<double>(distinct.size()));
  }
}

TEST(RunExperiment, SameSeedSameFile) {
  std::mt19937_64 rng(5);
  const auto tr = gen_zipf_onehot(15, 400, 0.8, rng);
  const auto dir = std::filesystem::temp_directory_path();
  for (auto p : {PolicyKind::SageHedge, PolicyKind::Ftpl}) {
    auto c = config(p, 15, 4, 400, 77);
    c.accounting = Accounting::Sampled;
    c.out_path = (dir / "kexperts_det_a.csv").string();
    run_experiment(c, tr);
    c.out_path = (dir / "kexperts_det_b.csv").string();
    run_experiment(c, tr);
    const auto a = slurp((dir / "kexperts_det_a.csv").string());
    EXPECT_EQ(a, slurp((dir / "kexperts_det_b.csv").string()));
    EXPECT_EQ(a.substr(0, a.find('\n')), "t,expected_reward,cum_reward,oracle_cum,regret,normalized_regret");
  }
}

TEST(RunExperiment, SampledAgreesWithExactInMean) {
  std::mt19937_64 rng(6);
  const std::size_t n = 20, k = 3, horizon = 2000;
  const auto tr = gen_zipf_onehot(n, horizon, 0.8, rng);
  const double exact = run_experiment(config(PolicyKind::SageHedge, n, k, horizon, 1), tr).rows.back().cum_reward;
  std::vector<double> sampled;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto c = config(PolicyKind::SageHedge, n, k, horizon, seed);
    c.accounting = Accounting::Sampled;
    const auto rec = run_experiment(c, tr);
    EXPECT_EQ(rec.accounting_used, Accounting::Sampled);
    sampled.push_back(rec.rows.back().cum_reward);
  }
  double mean = 0.0;
  for (double v : sampled) mean += v;
  mean /= 100.0;
  double var = 0.0;
  for (double v : sampled) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / 99.0 / 100.0);
  EXPECT_LE(std::abs(mean - exact), 3.0 * se);
}

TEST(RunExperiment, MaxVariantUsesSampledCredit) {
  std::mt19937_64 rng(7);
  const auto tr = gen_bernoulli_ensemble(10, 200, 0.1, rng);
  auto c = config(PolicyKind::SageHedge, 10, 2, 200, 3);
  c.variant = Variant::Max;
  const auto rec = run_experiment(c, tr);
  EXPECT_EQ(rec.accounting_used, Accounting::Sampled);
  EXPECT_EQ(rec.oracle_label, "bruteforce");
}

TEST(RunExperiment, PairwiseRecordsBothAccountings) {
  std::mt19937_64 rng(8);
  const auto tr = gen_zipf_pairs(8, 300, 1.0, rng);
  auto c = config(PolicyKind::Pairwise, 8, 3, 300, 5);
  c.variant = Variant::Pair;
  const auto rec = run_experiment(c, tr);
  EXPECT_EQ(rec.oracle_label, "pair_sqrt2k_items");
  double union_reward = -1.0;
  for (const auto& [name, v] : rec.extra) {
    if (name == "union_reward") union_reward = v;
  }
  EXPECT_GE(union_reward, 0.0);
}

TEST(ExperimentConfig, Validation) {
  std::mt19937_64 rng(9);
  const auto tr = gen_zipf_onehot(10, 50, 0.5, rng);
  auto c = config(PolicyKind::SageHedge, 10, 3, 50, 1);
  c.seed.reset();
  EXPECT_THROW(run_experiment(c, tr), ConfigError);
  EXPECT_THROW(run_experiment(config(PolicyKind::SageHedge, 10, 11, 50, 1), tr), ConfigError);
  EXPECT_THROW(run_experiment(config(PolicyKind::SageHedge, 10, 3, 60, 1), tr), ConfigError);
  EXPECT_THROW(run_experiment(config(PolicyKind::Pairwise, 10, 3, 50, 1), tr), ConfigError);
  EXPECT_THROW(parse_policy("belady"), ConfigError);
  EXPECT_THROW(parse_accounting("fuzzy"), ConfigError);
  auto bad_eta = config(PolicyKind::SageHedge, 10, 3, 50, 1);
  bad_eta.eta = -1.0;
  EXPECT_THROW(run_experiment(bad_eta, tr), ConfigError);
}

TEST(SummaryLine, MentionsHitRate) {
  std::mt19937_64 rng(10);
  const auto tr = gen_zipf_onehot(10, 100, 0.5, rng);
  const auto s = summary_line(run_experiment(config(PolicyKind::Lru, 10, 3, 100, 1), tr));
  EXPECT_NE(s.find("hit_rate="), std::string::npos);
  EXPECT_NE(s.find("final_regret="), std::string::npos);
}
