#pragma once

// The constructive policy behind the achievability theorem for k-sets:
// potentials phi_t(prefix) = E phi(prefix, uniform continuation), inclusion
// probabilities p_ti = T (phi_{t-1}(y^{t-1}) - phi_t(y^{t-1} i)) + k/N.
// Everything is enumerated, so N^T must stay small.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kexperts/errors.hpp"
#include "kexperts/sampling.hpp"

namespace kexperts {

inline constexpr double kEnumerationLimit = 1e7;

// Sequences in [N]^T are indexed base N with y_1 as the most significant digit.
inline std::size_t sequence_count(std::size_t n, std::size_t t) {
  const double c = std::pow(static_cast<double>(n), static_cast<double>(t));
  if (c > kEnumerationLimit) {
    throw InstanceTooLarge("N^T = " + std::to_string(c) + " exceeds the enumeration limit");
  }
  std::size_t out = 1;
  for (std::size_t i = 0; i < t; ++i) out *= n;
  return out;
}

inline std::vector<std::size_t> decode_sequence(std::size_t idx, std::size_t n, std::size_t t) {
  std::vector<std::size_t> y(t);
  for (std::size_t pos = t; pos-- > 0;) {
    y[pos] = idx % n;
    idx /= n;
  }
  return y;
}

inline std::size_t encode_sequence(std::span<const std::size_t> y, std::size_t n) {
  std::size_t idx = 0;
  for (std::size_t v : y) idx = idx * n + v;
  return idx;
}

// phi : [N]^T -> [0,1], stored as a table over all N^T sequences.
struct LossFunction {
  std::size_t n = 0;
  std::size_t t = 0;
  std::size_t k = 0;
  std::vector<double> values;

  static LossFunction tabulate(std::size_t n, std::size_t t, std::size_t k,
                               const std::function<double(std::span<const std::size_t>)>& phi) {
    if (k < 1 || k > n) throw CardinalityError("k outside [1, N]");
    if (t < 1) throw ConfigError("horizon must be >= 1");
    LossFunction f{n, t, k, std::vector<double>(sequence_count(n, t))};
    for (std::size_t s = 0; s < f.values.size(); ++s) {
      const auto y = decode_sequence(s, n, t);
      const double v = phi(y);
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("loss function leaves [0,1]");
      f.values[s] = v;
    }
    return f;
  }

  double operator()(std::span<const std::size_t> y) const { return values[encode_sequence(y, n)]; }
};

// levels[t][prefix] = phi_t(prefix), t = 0..T.
struct PotentialTable {
  std::size_t n = 0;
  std::size_t t = 0;
  std::size_t k = 0;
  std::vector<std::vector<double>> levels;

  static PotentialTable build(const LossFunction& phi) {
    PotentialTable tab{phi.n, phi.t, phi.k, std::vector<std::vector<double>>(phi.t + 1)};
    tab.levels[phi.t] = phi.values;
    const double inv = 1.0 / static_cast<double>(phi.n);
    for (std::size_t lvl = phi.t; lvl-- > 0;) {
      const auto& child = tab.levels[lvl + 1];
      auto& cur = tab.levels[lvl];
      cur.assign(child.size() / phi.n, 0.0);
      for (std::size_t p = 0; p < cur.size(); ++p) {
        double s = 0.0;
        for (std::size_t i = 0; i < phi.n; ++i) s += child[p * phi.n + i];
        cur[p] = s * inv;
      }
    }
    return tab;
  }

  double phi0() const { return levels[0][0]; }
  double at(std::span<const std::size_t> prefix) const {
    return levels[prefix.size()][encode_sequence(prefix, n)];
  }
};

struct StabilityReport {
  bool stable = true;
  std::vector<std::size_t> sequence;  // first violating sequence
  std::size_t coordinate = 0;         // 1-based round of the violation
  double excess = 0.0;
};

// max_i phi(.., i, ..) - mean <= k/(NT)  and  mean - min_i phi(.., i, ..) <= (1 - k/N)/T,
// for every sequence and coordinate. Violations smaller than `slack` are ignored.
inline StabilityReport stability_check(const LossFunction& phi, double slack = 1e-12) {
  const std::size_t n = phi.n;
  const std::size_t total = phi.values.size();
  const double nn = static_cast<double>(n);
  const double tt = static_cast<double>(phi.t);
  const double kk = static_cast<double>(phi.k);
  const double up = kk / (nn * tt);
  const double down = (1.0 - kk / nn) / tt;
  std::size_t stride = total;
  for (std::size_t pos = 0; pos < phi.t; ++pos) {
    stride /= n;  // weight of coordinate pos in the index
    for (std::size_t s = 0; s < total; ++s) {
      if ((s / stride) % n != 0) continue;  // visit each fibre once, from its digit-0 member
      double mx = -1.0, mn = 2.0, mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = phi.values[s + i * stride];
        mx = std::max(mx, v);
        mn = std::min(mn, v);
        mean += v;
      }
      mean /= nn;
      const double e1 = mx - mean - up;
      const double e2 = mean - mn - down;
      if (e1 > slack || e2 > slack) {
        return StabilityReport{false, decode_sequence(s, n, phi.t), pos + 1, std::max(e1, e2)};
      }
    }
  }
  return {};
}

struct AchievabilityReport {
  double mean = 0.0;
  double threshold = 0.0;  // 1 - k/N
  bool achievable = false;
};

inline AchievabilityReport achievability_check(const LossFunction& phi, double slack = 1e-12) {
  double s = 0.0;
  for (double v : phi.values) s += v;
  AchievabilityReport r;
  r.mean = s / static_cast<double>(phi.values.size());
  r.threshold = 1.0 - static_cast<double>(phi.k) / static_cast<double>(phi.n);
  r.achievable = r.mean >= r.threshold - slack;
  return r;
}

// Inclusion probabilities for round t (1-based) after `prefix` = y_1..y_{t-1}.
inline MarginalVector cover_marginals(const PotentialTable& tab, std::span<const std::size_t> prefix) {
  const std::size_t t = prefix.size() + 1;
  if (t > tab.t) throw ConfigError("prefix longer than the horizon");
  const double tt = static_cast<double>(tab.t);
  const double base = static_cast<double>(tab.k) / static_cast<double>(tab.n);
  const double parent = tab.levels[t - 1][encode_sequence(prefix, tab.n)];
  const std::size_t first_child = encode_sequence(prefix, tab.n) * tab.n;
  std::vector<double> p(tab.n);
  for (std::size_t i = 0; i < tab.n; ++i) {
    p[i] = tt * (parent - tab.levels[t][first_child + i]) + base;
  }
  try {
    return validate_marginals(p, tab.k, 1e-9);
  } catch (const InfeasibleMarginals& e) {
    throw FeasibilityViolation(std::string("cover marginals infeasible (is phi stable?): ") + e.what());
  } catch (const CardinalityError& e) {
    throw FeasibilityViolation(e.what());
  }
}

// mu(y) = (1/T) sum_t (1 - p_t(y_t)), no sampling.
inline double exact_expected_loss(const PotentialTable& tab, std::span<const std::size_t> y) {
  if (y.size() != tab.t) throw ConfigError("sequence length differs from the horizon");
  double loss = 0.0;
  for (std::size_t t = 0; t < tab.t; ++t) {
    const auto m = cover_marginals(tab, y.first(t));
    loss += 1.0 - m[y[t]];
  }
  return loss / static_cast<double>(tab.t);
}

struct CoverRound {
  std::vector<double> p;
  KSet set;
  bool hit = false;
};

template <class URBG>
std::vector<CoverRound> cover_play(const PotentialTable& tab, std::span<const std::size_t> y, URBG& rng) {
  if (y.size() != tab.t) throw ConfigError("sequence length differs from the horizon");
  std::vector<CoverRound> out;
  out.reserve(tab.t);
  for (std::size_t t = 0; t < tab.t; ++t) {
    const auto m = cover_marginals(tab, y.first(t));
    CoverRound r;
    r.p = m.values();
    r.set = madow_sample(m, rng);
    r.hit = r.set.contains(y[t]);
    out.push_back(std::move(r));
  }
  return out;
}

// Stable phi around the level `mean_value` (>= 1 - k/N for achievability):
// i.i.d. perturbations, re-centred, then shrunk until the stability check passes.
template <class URBG>
LossFunction random_stable_phi(std::size_t n, std::size_t t, std::size_t k, double mean_value, URBG& rng) {
  LossFunction f{n, t, k, std::vector<double>(sequence_count(n, t))};
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> noise(f.values.size());
  double avg = 0.0;
  for (double& e : noise) avg += e = u(rng);
  avg /= static_cast<double>(noise.size());
  for (double& e : noise) e -= avg;
  const double room = std::min(mean_value, 1.0 - mean_value);
  double scale = room;
  for (int attempt = 0; attempt < 200; ++attempt) {
    for (std::size_t s = 0; s < f.values.size(); ++s) f.values[s] = mean_value + scale * noise[s];
    // noise lies in [-2, 2] after centring
    bool in_range = true;
    for (double v : f.values) in_range = in_range && v >= 0.0 && v <= 1.0;
    if (in_range && stability_check(f, 0.0).stable) return f;
    scale *= 0.8;
  }
  std::fill(f.values.begin(), f.values.end(), mean_value);
  return f;
}

}  // namespace kexperts
