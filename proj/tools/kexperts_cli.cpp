#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kexperts/kexperts.hpp"

using namespace kexperts;

namespace {

struct TraceSource {
  std::string path;
  std::string gen;
  std::string kind;  // empty: inferred
  double zipf_exponent = 0.8;
  std::optional<double> bernoulli_p;
};

void add_trace_options(CLI::App* app, TraceSource& src) {
  auto* trace = app->add_option("--trace", src.path, "Trace CSV file");
  auto* gen = app->add_option("--gen", src.gen, "Synthetic trace generator")
                  ->check(CLI::IsMember({"zipf", "bernoulli", "distance"}));
  trace->excludes(gen);
  app->add_option("--trace-kind", src.kind, "Round kind of --trace: onehot, pair or dense")
      ->check(CLI::IsMember({"onehot", "pair", "dense"}));
  app->add_option("--zipf-exponent", src.zipf_exponent, "Zipf exponent for zipf and distance traces")
      ->capture_default_str();
  app->add_option("--bernoulli-p", src.bernoulli_p, "Bernoulli parameter (default 1/(2k))");
}

Trace make_trace(const TraceSource& src, std::size_t n, std::size_t k, std::size_t t, bool pairs,
                 std::uint64_t seed) {
  if (!src.path.empty()) {
    RoundKind kind = pairs ? RoundKind::Pair : RoundKind::OneHot;
    if (!src.kind.empty()) kind = parse_round_kind(src.kind);
    return load_trace_csv(src.path, kind, n);
  }
  if (src.gen.empty()) throw ConfigError("one of --trace or --gen is required");
  // the trace stream is seeded apart from the policy stream
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  if (src.gen == "zipf") {
    return pairs ? gen_zipf_pairs(n, t, src.zipf_exponent, rng) : gen_zipf_onehot(n, t, src.zipf_exponent, rng);
  }
  if (pairs) throw ConfigError("--gen " + src.gen + " cannot produce pair traces");
  if (src.gen == "bernoulli") {
    return gen_bernoulli_ensemble(n, t, src.bernoulli_p.value_or(1.0 / (2.0 * static_cast<double>(k))), rng);
  }
  const auto requests = gen_zipf_onehot(n, t, src.zipf_exponent, rng).items;
  return gen_distance_reward(n, requests);
}

void print_bounds(const std::vector<BoundEntry>& table) {
  std::printf("bound,value,applicable\n");
  for (const auto& e : table) std::printf("%s,%.10g,%s\n", e.name.c_str(), e.value, e.applicable ? "yes" : "no");
}

// Quick invariant sweeps over small random instances.
int validate(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int failures = 0;
  auto report = [&](const char* name, bool ok, double metric) {
    std::printf("%-28s %s  (%.3g)\n", name, ok ? "PASS" : "FAIL", metric);
    if (!ok) ++failures;
  };

  double worst = 0.0;
  for (std::size_t n = 4; n <= 10; ++n) {
    const std::size_t k = 1 + rng() % (n - 1);
    std::vector<std::size_t> hist(30);
    WeightVector w = WeightVector::unit(n);
    for (auto& y : hist) w.log_weights[y = rng() % n] += 0.7;
    const auto a = hedge_marginals(w, k);
    const auto b = expanded_hedge_oracle(hist, 0.7, n, k);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(a[i] - b.marginals[i]));
  }
  report("hedge marginals", worst <= 1e-9, worst);

  worst = 0.0;
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t k : {1u, 4u, 9u}) {
    std::vector<double> score(20);
    for (double& s : score) s = g(rng);
    const auto m = water_fill(score, 1.0, k);
    const auto f = empirical_inclusion(m, 50000, rng);
    for (std::size_t i = 0; i < 20; ++i) worst = std::max(worst, std::abs(f[i] - m[i]));
  }
  report("madow inclusion", worst <= 0.02, worst);

  worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng() % 200;
    const std::size_t k = 1 + rng() % n;
    std::vector<double> r(n);
    for (double& x : r) x = 10.0 * g(rng);
    const auto w = water_fill_detailed(r, 0.8, k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += w.p[i];
      if (k < n) worst = std::max(worst, std::abs(w.p[i] - std::min(1.0, std::exp(w.log_k + 0.8 * r[i]))));
    }
    worst = std::max(worst, std::abs(total - static_cast<double>(k)));
  }
  report("water-filling KKT", worst <= 1e-9, worst);

  worst = 0.0;
  CoeffEngine engine(16, 0.05);
  for (int t = 0; t < 200; ++t) {
    engine.bump(rng() % 16);
    const auto a = engine.marginals(5);
    const auto b = hedge_marginals(engine.weights(), 5);
    for (std::size_t i = 0; i < 16; ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / b[i]);
  }
  report("coefficient engine", worst <= 1e-6, worst);

  worst = 0.0;
  const auto phi = random_stable_phi(3, 5, 1, 0.7, rng);
  const auto tab = PotentialTable::build(phi);
  const double shift = (2.0 / 3.0) - achievability_check(phi).mean;
  for (std::size_t s = 0; s < phi.values.size(); ++s) {
    const auto y = decode_sequence(s, 3, 5);
    worst = std::max(worst, std::abs(exact_expected_loss(tab, y) - phi.values[s] - shift));
  }
  report("cover telescoping", worst <= 1e-12, worst);

  worst = 0.0;
  const auto tr = gen_bernoulli_ensemble(9, 40, 0.2, rng);
  for (std::size_t k = 1; k <= 4; ++k) {
    worst = std::max(worst, oracle_partition_lowerbound(tr, k).value - oracle_bruteforce(tr, Variant::Max, k).value);
  }
  report("partition lower bound", worst <= 1e-12, worst);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online k-set prediction: policies, oracles and regret bounds"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run a policy over a trace and report regret");
  std::string policy, variant = "sum", accounting = "exact", link = "identity", pair_base = "ftrl", out;
  std::size_t n = 0, k = 0, t = 0;
  std::optional<double> eta, sigma;
  double p_exponent = 2.0;
  std::optional<std::uint64_t> seed;
  TraceSource src;
  run->add_option("--policy", policy, "Policy")
      ->required()
      ->check(CLI::IsMember({"sage-hedge", "ftrl", "pairwise", "cover", "lru", "lfu", "lfu-incache", "ftpl"}));
  run->add_option("--variant", variant, "Reward variant")
      ->check(CLI::IsMember({"sum", "max", "lp", "pair"}))
      ->capture_default_str();
  run->add_option("--n", n, "Number of items")->required();
  run->add_option("--k", k, "Set size")->required();
  run->add_option("--t", t, "Horizon")->required();
  run->add_option("--eta", eta, "Learning rate (tuned when omitted)");
  run->add_option("--sigma", sigma, "FTPL noise scale");
  run->add_option("--p-exponent", p_exponent, "Exponent of the lp variant")->capture_default_str();
  run->add_option("--seed", seed, "Random seed")->required();
  run->add_option("--accounting", accounting, "exact or sampled")
      ->check(CLI::IsMember({"exact", "sampled"}))
      ->capture_default_str();
  run->add_option("--out", out, "Per-round CSV output path");
  run->add_option("--link", link, "FTRL link function")
      ->check(CLI::IsMember({"identity", "sqrt", "log1p"}))
      ->capture_default_str();
  run->add_option("--pair-base", pair_base, "Base policy of the pairwise reduction")
      ->check(CLI::IsMember({"ftrl", "sage-hedge"}))
      ->capture_default_str();
  add_trace_options(run, src);

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Print the regret bound table");
  std::size_t bn = 0, bk = 0;
  double bt = 0.0;
  bounds->add_option("--n", bn, "Number of items")->required();
  bounds->add_option("--k", bk, "Set size")->required();
  bounds->add_option("--t", bt, "Horizon")->required();

  // oracle
  auto* orc = app.add_subcommand("oracle", "Best fixed set in hindsight for a trace");
  std::string ovariant = "sum";
  std::size_t on = 0, ok = 0, ot = 0;
  double op = 2.0;
  std::uint64_t oseed = 1;
  TraceSource osrc;
  orc->add_option("--n", on, "Number of items")->required();
  orc->add_option("--k", ok, "Set size")->required();
  orc->add_option("--t", ot, "Rounds to generate with --gen");
  orc->add_option("--variant", ovariant, "Reward variant")
      ->check(CLI::IsMember({"sum", "max", "lp", "pair"}))
      ->capture_default_str();
  orc->add_option("--p-exponent", op, "Exponent of the lp variant")->capture_default_str();
  orc->add_option("--seed", oseed, "Seed for --gen")->capture_default_str();
  add_trace_options(orc, osrc);

  // validate
  auto* val = app.add_subcommand("validate", "Run quick invariant checks");
  std::uint64_t vseed = 1;
  val->add_option("--seed", vseed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      ExperimentConfig cfg;
      cfg.policy = parse_policy(policy);
      cfg.variant = parse_variant(variant);
      cfg.n = n;
      cfg.k = k;
      cfg.t = t;
      cfg.eta = eta;
      cfg.sigma = sigma;
      cfg.p_exponent = p_exponent;
      cfg.link = parse_link(link);
      cfg.pair_base = pair_base == "ftrl" ? PairBase::Ftrl : PairBase::SageHedge;
      cfg.seed = seed;
      cfg.accounting = parse_accounting(accounting);
      cfg.out_path = out;
      cfg.validate();
      const bool pairs = cfg.policy == PolicyKind::Pairwise || cfg.variant == Variant::Pair;
      const Trace tr = make_trace(src, n, k, t, pairs, *seed);
      const auto rec = run_experiment(cfg, tr);
      std::cout << summary_line(rec) << '\n';
      return 0;
    }
    if (*bounds) {
      print_bounds(bound_table(bn, bk, bt));
      return 0;
    }
    if (*orc) {
      const Variant v = parse_variant(ovariant);
      if (!osrc.gen.empty() && ot == 0) throw ConfigError("--t is required with --gen");
      const Trace tr = make_trace(osrc, on, ok, ot, v == Variant::Pair, oseed);
      OracleResult res;
      std::string label;
      if (v == Variant::Sum) {
        res = oracle_sum(tr, ok);
        label = "sum_topk";
      } else if (binomial(tr.n, ok) * static_cast<double>(tr.rounds()) <= 1e8) {
        res = oracle_bruteforce(tr, v, ok, op);
        label = "bruteforce";
      } else if (v == Variant::Max) {
        res = oracle_partition_lowerbound(tr, ok);
        label = "partition_lowerbound";
      } else {
        throw InstanceTooLarge("no tractable oracle for this variant at this size");
      }
      std::cout << "oracle=" << label << " value=" << res.value << " set=";
      for (std::size_t i = 0; i < res.set.members.size(); ++i) std::cout << (i ? " " : "") << res.set.members[i];
      std::cout << '\n';
      return 0;
    }
    if (*val) return validate(vseed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
