#pragma once

// Offline oracles, regret bookkeeping, bound calculators and the experiment
// runner behind the command-line tool.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kexperts/baselines.hpp"
#include "kexperts/combinatorics.hpp"
#include "kexperts/cover.hpp"
#include "kexperts/environments.hpp"
#include "kexperts/errors.hpp"
#include "kexperts/ftrl.hpp"
#include "kexperts/pairwise.hpp"
#include "kexperts/sage_hedge.hpp"
#include "kexperts/sampling.hpp"

namespace kexperts {

struct OracleResult {
  KSet set;
  double value = 0.0;
};

// Column sums of the trace's reward vectors.
inline std::vector<double> cumulative_rewards(const Trace& tr) {
  std::vector<double> col(tr.n, 0.0);
  for (std::size_t t = 0; t < tr.rounds(); ++t) {
    switch (tr.kind) {
      case RoundKind::OneHot:
        col[tr.items[t]] += 1.0;
        break;
      case RoundKind::Pair:
        col[tr.pairs[t].first] += 1.0;
        col[tr.pairs[t].second] += 1.0;
        break;
      case RoundKind::Dense:
        for (std::size_t i = 0; i < tr.n; ++i) col[i] += tr.dense[t][i];
        break;
    }
  }
  return col;
}

// Best fixed k-set for sum rewards: the k largest column sums (ties by index).
inline OracleResult oracle_sum(const Trace& tr, std::size_t k) {
  if (k < 1 || k > tr.n) throw CardinalityError("k outside [1, N]");
  const auto col = cumulative_rewards(tr);
  std::vector<std::size_t> idx(tr.n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return col[a] > col[b]; });
  std::vector<std::size_t> top(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(top.begin(), top.end());
  double v = 0.0;
  for (std::size_t i : top) v += col[i];
  return {KSet{std::move(top)}, v};
}

inline double trace_reward(const Trace& tr, Variant v, std::span<const std::size_t> s, std::size_t t,
                           double p = 2.0) {
  if (tr.kind == RoundKind::Pair && v == Variant::Pair) {
    return static_cast<double>(pairwise_reward(s, tr.pairs[t]));
  }
  const RewardVector r = tr.reward(t);
  return reward_eval(v, s, r.values, p);
}

inline double set_value(const Trace& tr, Variant v, std::span<const std::size_t> s, double p = 2.0) {
  double total = 0.0;
  for (std::size_t t = 0; t < tr.rounds(); ++t) total += trace_reward(tr, v, s, t, p);
  return total;
}

// Exact optimum over all k-sets.
inline OracleResult oracle_bruteforce(const Trace& tr, Variant v, std::size_t k, double p = 2.0) {
  if (k < 1 || k > tr.n) throw CardinalityError("k outside [1, N]");
  if (binomial(tr.n, k) * static_cast<double>(std::max<std::size_t>(tr.rounds(), 1)) > 1e8) {
    throw InstanceTooLarge("binomial(N,k) * T exceeds 1e8");
  }
  OracleResult best;
  bool first = true;
  if (tr.kind == RoundKind::Pair && v == Variant::Pair) {
    const auto d = densest_ksubgraph_bruteforce(tr.pairs, tr.n, k);
    return {KSet{d.vertices}, static_cast<double>(d.covered)};
  }
  std::vector<RewardVector> rows;
  rows.reserve(tr.rounds());
  for (std::size_t t = 0; t < tr.rounds(); ++t) rows.push_back(tr.reward(t));
  for_each_combination(tr.n, k, [&](const std::vector<std::size_t>& s) {
    double total = 0.0;
    for (const auto& r : rows) total += reward_eval(v, s, r.values, p);
    if (first || total > best.value) {
      best = {KSet{s}, total};
      first = false;
    }
  });
  return best;
}

// Splits the first k*floor(N/k) experts into k consecutive blocks and keeps
// each block's best expert by column sum; the max-reward value of that set
// lower-bounds the max-reward optimum.
inline OracleResult oracle_partition_lowerbound(const Trace& tr, std::size_t k) {
  if (k < 1 || k > tr.n) throw CardinalityError("k outside [1, N]");
  const auto col = cumulative_rewards(tr);
  const std::size_t block = tr.n / k;
  std::vector<std::size_t> pick;
  for (std::size_t b = 0; b < k; ++b) {
    std::size_t best = b * block;
    for (std::size_t i = b * block; i < (b + 1) * block; ++i) {
      if (col[i] > col[best]) best = i;
    }
    pick.push_back(best);
  }
  return {KSet{pick}, set_value(tr, Variant::Max, pick)};
}

struct BoundEntry {
  std::string name;
  double value = 0.0;
  bool applicable = true;
};

inline std::vector<BoundEntry> bound_table(std::size_t n, std::size_t k, double horizon) {
  if (n < 1 || k < 1 || k > n || !(horizon > 0.0)) throw ConfigError("bound_table needs 1 <= k <= N, T > 0");
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  const double ln_nk = std::log(nn / kk);
  const double ratio = nn / kk;
  std::vector<BoundEntry> out;
  out.push_back({"ftpl_gaussian", 2.0 * std::sqrt(2.0 * horizon * kk * log_binomial(n, k)), true});
  out.push_back({"component_hedge", std::sqrt(2.0 * kk * horizon * ln_nk), true});
  out.push_back({"sage_hedge", std::sqrt(2.0 * kk * horizon * (ln_nk + 1.0)), true});
  out.push_back({"sage_ftrl", 2.0 * std::sqrt(2.0 * kk * horizon * ln_nk), true});
  out.push_back({"lower_bound_sum", std::sqrt(kk * horizon / (2.0 * std::numbers::pi)), ratio >= 2.0});
  out.push_back({"lower_bound_max", 0.02 * std::sqrt(kk * horizon * ln_nk),
                 ratio >= 7.0 && horizon >= 16.0 * kk * ln_nk});
  return out;
}

inline const BoundEntry& bound_named(const std::vector<BoundEntry>& table, std::string_view name) {
  for (const auto& e : table) {
    if (e.name == name) return e;
  }
  throw ConfigError("no bound named '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

enum class PolicyKind { SageHedge, Ftrl, Pairwise, Cover, Lru, Lfu, LfuInCache, Ftpl };
enum class Accounting { Exact, Sampled };

inline PolicyKind parse_policy(std::string_view s) {
  if (s == "sage-hedge") return PolicyKind::SageHedge;
  if (s == "ftrl") return PolicyKind::Ftrl;
  if (s == "pairwise") return PolicyKind::Pairwise;
  if (s == "cover") return PolicyKind::Cover;
  if (s == "lru") return PolicyKind::Lru;
  if (s == "lfu") return PolicyKind::Lfu;
  if (s == "lfu-incache") return PolicyKind::LfuInCache;
  if (s == "ftpl") return PolicyKind::Ftpl;
  throw ConfigError("unknown policy '" + std::string(s) + "'");
}

inline Accounting parse_accounting(std::string_view s) {
  if (s == "exact") return Accounting::Exact;
  if (s == "sampled") return Accounting::Sampled;
  throw ConfigError("unknown accounting mode '" + std::string(s) + "'");
}

struct ExperimentConfig {
  PolicyKind policy = PolicyKind::SageHedge;
  Variant variant = Variant::Sum;
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t t = 0;
  std::optional<double> eta;    // tuned when absent
  std::optional<double> sigma;  // FTPL noise scale
  double p_exponent = 2.0;      // for the lp variant
  LinkFunction link = LinkFunction::Identity;
  PairBase pair_base = PairBase::Ftrl;
  std::optional<std::uint64_t> seed;
  Accounting accounting = Accounting::Exact;
  std::string out_path;

  void validate() const {
    if (n < 1) throw ConfigError("--n must be >= 1");
    if (k < 1) throw ConfigError("--k must be >= 1");
    if (policy != PolicyKind::Pairwise && k > n) throw ConfigError("--k must not exceed --n");
    if (t < 1) throw ConfigError("--t must be >= 1");
    if (eta && !(*eta > 0.0)) throw ConfigError("--eta must be positive");
    if (sigma && !(*sigma > 0.0)) throw ConfigError("--sigma must be positive");
    if (!seed) throw ConfigError("--seed is required");
    if (variant == Variant::Lp && !(p_exponent >= 1.0)) throw ConfigError("--p-exponent must be >= 1");
  }
};

struct RegretRow {
  std::size_t t = 0;
  double expected_reward = 0.0;
  double cum_reward = 0.0;
  double oracle_cum = 0.0;
  double regret = 0.0;
  double normalized_regret = 0.0;
};

struct RegretRecord {
  std::vector<RegretRow> rows;
  double final_regret = 0.0;
  double hit_rate = 0.0;
  double oracle_value = 0.0;
  std::string oracle_label;
  Accounting accounting_used = Accounting::Exact;
  double eta_used = 0.0;
  std::vector<BoundEntry> bounds;
  std::vector<std::pair<std::string, double>> extra;  // labelled side results
};

inline void write_regret_csv(std::ostream& out, const RegretRecord& rec) {
  out << "t,expected_reward,cum_reward,oracle_cum,regret,normalized_regret\n";
  out << std::setprecision(17);
  for (const auto& r : rec.rows) {
    out << r.t << ',' << r.expected_reward << ',' << r.cum_reward << ',' << r.oracle_cum << ',' << r.regret
        << ',' << r.normalized_regret << '\n';
  }
}

inline std::string summary_line(const RegretRecord& rec) {
  std::ostringstream s;
  s << std::setprecision(10) << "final_regret=" << rec.final_regret << " hit_rate=" << rec.hit_rate
    << " oracle=" << rec.oracle_value << " oracle_kind=" << rec.oracle_label
    << " accounting=" << (rec.accounting_used == Accounting::Exact ? "exact" : "sampled")
    << " eta=" << rec.eta_used;
  for (const auto& [name, v] : rec.extra) s << ' ' << name << '=' << v;
  return s.str();
}

namespace detail {

struct OracleChoice {
  std::vector<std::size_t> set;
  std::string label;
};

inline OracleChoice pick_oracle(const ExperimentConfig& cfg, const Trace& tr, RegretRecord& rec) {
  if (tr.kind == RoundKind::Pair && cfg.variant == Variant::Pair) {
    const std::size_t k_items = std::min(cfg.k, tr.n);
    const std::size_t sqrt_items = std::min<std::size_t>(
        static_cast<std::size_t>(std::ceil(std::sqrt(2.0 * static_cast<double>(cfg.k)))), tr.n);
    const std::size_t two_k = std::min(2 * cfg.k, tr.n);
    const auto a = densest_ksubgraph_bruteforce(tr.pairs, tr.n, k_items);
    const auto b = densest_ksubgraph_bruteforce(tr.pairs, tr.n, sqrt_items);
    const auto c = densest_ksubgraph_bruteforce(tr.pairs, tr.n, two_k);
    rec.extra.emplace_back("oracle_k_items", static_cast<double>(a.covered));
    rec.extra.emplace_back("oracle_sqrt2k_items", static_cast<double>(b.covered));
    rec.extra.emplace_back("oracle_2k_items", static_cast<double>(c.covered));
    if (cfg.policy == PolicyKind::Pairwise) return {b.vertices, "pair_sqrt2k_items"};
    return {a.vertices, "pair_k_items"};
  }
  if (cfg.variant == Variant::Sum) return {oracle_sum(tr, cfg.k).set.members, "sum_topk"};
  const double work = binomial(tr.n, cfg.k) * static_cast<double>(tr.rounds());
  if (work <= 1e8) return {oracle_bruteforce(tr, cfg.variant, cfg.k, cfg.p_exponent).set.members, "bruteforce"};
  if (cfg.variant == Variant::Max) return {oracle_partition_lowerbound(tr, cfg.k).set.members, "partition_lowerbound"};
  throw InstanceTooLarge("no tractable oracle for this variant at this size");
}

// Loss phi(y) = (1/T) sum_t g(y_t) with g lowered by `a` on item 0 and raised
// evenly elsewhere; stable and achievable for 0 <= a <= min(1 - k/N, (N-1)k/N).
inline LossFunction favoured_item_phi(std::size_t n, std::size_t t, std::size_t k) {
  const double base = 1.0 - static_cast<double>(k) / static_cast<double>(n);
  const double a = 0.5 * std::min(base, static_cast<double>((n - 1) * k) / static_cast<double>(n));
  std::vector<double> g(n, base + (n > 1 ? a / static_cast<double>(n - 1) : 0.0));
  g[0] = base - a;
  return LossFunction::tabulate(n, t, k, [&](std::span<const std::size_t> y) {
    double s = 0.0;
    for (std::size_t v : y) s += g[v];
    return s / static_cast<double>(y.size());
  });
}

}  // namespace detail

// Drives the configured policy over `tr`. Exact accounting credits the
// expected reward <r_t, p_t> whenever the policy exposes marginals and the
// reward is linear in them; otherwise the sampled set's reward is used.
inline RegretRecord run_experiment(const ExperimentConfig& cfg, const Trace& tr) {
  cfg.validate();
  if (tr.n != cfg.n) throw ConfigError("trace N differs from --n");
  if (tr.rounds() < cfg.t) throw ConfigError("trace has fewer rounds than --t");
  const std::size_t n = cfg.n, k = cfg.k, horizon = cfg.t;
  Trace run = tr;
  run.timestamps.resize(horizon);
  if (run.kind == RoundKind::OneHot) run.items.resize(horizon);
  if (run.kind == RoundKind::Pair) run.pairs.resize(horizon);
  if (run.kind == RoundKind::Dense) run.dense.resize(horizon);

  const bool is_cache = cfg.policy == PolicyKind::Lru || cfg.policy == PolicyKind::Lfu ||
                        cfg.policy == PolicyKind::LfuInCache;
  const bool needs_items = is_cache || cfg.policy == PolicyKind::Cover;
  if (needs_items && run.kind != RoundKind::OneHot) throw ConfigError("this policy needs a one-hot trace");
  if (cfg.policy == PolicyKind::Pairwise && run.kind != RoundKind::Pair) {
    throw ConfigError("the pairwise policy needs a pair trace");
  }
  if (cfg.variant == Variant::Pair && run.kind != RoundKind::Pair) throw ConfigError("--variant pair needs a pair trace");

  RegretRecord rec;
  rec.bounds = bound_table(n, std::min(k, n), static_cast<double>(horizon));
  const auto oracle = detail::pick_oracle(cfg, run, rec);
  rec.oracle_label = oracle.label;

  const bool linear = cfg.variant == Variant::Sum;
  const bool has_marginals = cfg.policy == PolicyKind::SageHedge || cfg.policy == PolicyKind::Ftrl ||
                             cfg.policy == PolicyKind::Cover || cfg.policy == PolicyKind::Pairwise;
  const bool exact = cfg.accounting == Accounting::Exact && has_marginals &&
                     (linear || cfg.policy == PolicyKind::Pairwise);
  rec.accounting_used = (exact || is_cache) ? Accounting::Exact : Accounting::Sampled;

  std::mt19937_64 rng(*cfg.seed);
  const bool one_hot_like = run.kind != RoundKind::Dense;

  SageHedgeState hedge;
  FtrlState ftrl;
  std::optional<PairwisePolicy> pairwise;
  std::optional<PotentialTable> cover_table;
  CacheState cache;
  std::vector<double> ftpl_scores;
  double sigma = 0.0;

  switch (cfg.policy) {
    case PolicyKind::SageHedge:
      rec.eta_used = cfg.eta.value_or(tune_eta(horizon, n, k));
      hedge = SageHedgeState::fresh(n, k, rec.eta_used);
      break;
    case PolicyKind::Ftrl: {
      const double g = static_cast<double>(horizon) * (one_hot_like ? 1.0 : static_cast<double>(k));
      rec.eta_used = cfg.eta.value_or(ftrl_tune_eta(n, k, g));
      ftrl = FtrlState::fresh(n, k, rec.eta_used, cfg.link);
      break;
    }
    case PolicyKind::Pairwise: {
      const std::size_t m = pair_count(n);
      if (k > m) throw ConfigError("--k exceeds the number of super-items");
      rec.eta_used = cfg.eta.value_or(cfg.pair_base == PairBase::Ftrl
                                          ? ftrl_tune_eta(m, k, static_cast<double>(horizon))
                                          : tune_eta(horizon, m, k));
      pairwise.emplace(n, k, rec.eta_used, cfg.pair_base);
      break;
    }
    case PolicyKind::Cover:
      cover_table = PotentialTable::build(detail::favoured_item_phi(n, horizon, k));
      break;
    case PolicyKind::Lru:
    case PolicyKind::Lfu:
    case PolicyKind::LfuInCache:
      cache = CacheState::empty(n, k);
      break;
    case PolicyKind::Ftpl:
      sigma = cfg.sigma.value_or(ftpl_default_sigma(horizon, n, k));
      rec.extra.emplace_back("sigma", sigma);
      ftpl_scores.assign(n, 0.0);
      break;
  }

  std::vector<double> oracle_round(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    oracle_round[t] = trace_reward(run, cfg.variant, oracle.set, t, cfg.p_exponent);
  }
  rec.oracle_value = std::accumulate(oracle_round.begin(), oracle_round.end(), 0.0);

  double cum = 0.0, oracle_cum = 0.0, union_cum = 0.0;
  std::size_t hits = 0;
  rec.rows.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const RewardVector r = run.reward(t);
    double credited = 0.0;
    double realised = 0.0;
    switch (cfg.policy) {
      case PolicyKind::SageHedge: {
        auto [set, m] = sage_predict(hedge, rng);
        realised = trace_reward(run, cfg.variant, set.members, t, cfg.p_exponent);
        credited = exact ? m.dot(r.values) : realised;
        sage_update(hedge, r.values);
        break;
      }
      case PolicyKind::Ftrl: {
        auto [set, m] = ftrl_predict(ftrl, rng);
        realised = trace_reward(run, cfg.variant, set.members, t, cfg.p_exponent);
        credited = exact ? m.dot(r.values) : realised;
        ftrl_update(ftrl, r.values, m);
        break;
      }
      case PolicyKind::Pairwise: {
        auto pred = pairwise->predict(rng);
        const auto req = run.pairs[t];
        const std::size_t idx = pair_encode(req.first, req.second, n);
        realised = static_cast<double>(pairwise_reward(pred.items, req));
        union_cum += realised;
        credited = exact ? pred.marginals[idx] : (pred.super_set.contains(idx) ? 1.0 : 0.0);
        pairwise->update(req, pred.marginals);
        break;
      }
      case PolicyKind::Cover: {
        std::span<const std::size_t> prefix(run.items.data(), t);
        const auto m = cover_marginals(*cover_table, prefix);
        const KSet set = madow_sample(m, rng);
        realised = trace_reward(run, cfg.variant, set.members, t, cfg.p_exponent);
        credited = exact ? m.dot(r.values) : realised;
        break;
      }
      case PolicyKind::Lru:
      case PolicyKind::Lfu:
      case PolicyKind::LfuInCache: {
        const KSet before = cfg.policy == PolicyKind::Lru ? lru_step(cache, run.items[t])
                            : cfg.policy == PolicyKind::Lfu
                                ? lfu_step(cache, run.items[t], LfuMode::Perfect)
                                : lfu_step(cache, run.items[t], LfuMode::InCache);
        realised = before.members.empty() ? 0.0
                                          : trace_reward(run, cfg.variant, before.members, t, cfg.p_exponent);
        credited = realised;
        break;
      }
      case PolicyKind::Ftpl: {
        const KSet set = ftpl_predict(ftpl_scores, sigma, k, rng);
        realised = trace_reward(run, cfg.variant, set.members, t, cfg.p_exponent);
        credited = realised;
        for (std::size_t i = 0; i < n; ++i) ftpl_scores[i] += r.values[i];
        break;
      }
    }
    if (realised > 0.0) ++hits;
    cum += credited;
    oracle_cum += oracle_round[t];
    RegretRow row;
    row.t = t + 1;
    row.expected_reward = credited;
    row.cum_reward = cum;
    row.oracle_cum = oracle_cum;
    row.regret = oracle_cum - cum;
    row.normalized_regret = row.regret / static_cast<double>(t + 1);
    rec.rows.push_back(row);
  }
  rec.final_regret = rec.rows.back().regret;
  rec.hit_rate = static_cast<double>(hits) / static_cast<double>(horizon);
  if (cfg.policy == PolicyKind::Pairwise) rec.extra.emplace_back("union_reward", union_cum);

  if (!cfg.out_path.empty()) {
    std::ofstream out(cfg.out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + cfg.out_path + "'");
    write_regret_csv(out, rec);
  }
  return rec;
}

}  // namespace kexperts
