#pragma once

// FTRL with the entropic regularizer over the capped simplex
// {p in [0,1]^N : sum p = k}, for sum rewards passed through a concave link.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kexperts/environments.hpp"
#include "kexperts/errors.hpp"
#include "kexperts/sampling.hpp"

namespace kexperts {

enum class LinkFunction { Identity, SqrtShifted, Log1p };

inline LinkFunction parse_link(std::string_view s) {
  if (s == "identity") return LinkFunction::Identity;
  if (s == "sqrt") return LinkFunction::SqrtShifted;
  if (s == "log1p") return LinkFunction::Log1p;
  throw ConfigError("unknown link function '" + std::string(s) + "'");
}

// psi(x) on x >= 0
inline double link_value(LinkFunction f, double x) {
  switch (f) {
    case LinkFunction::Identity: return x;
    case LinkFunction::SqrtShifted: return std::sqrt(x + 1.0) - 1.0;
    case LinkFunction::Log1p: return std::log1p(x);
  }
  return x;
}

inline double link_derivative(LinkFunction f, double x) {
  switch (f) {
    case LinkFunction::Identity: return 1.0;
    case LinkFunction::SqrtShifted: return 0.5 / std::sqrt(x + 1.0);
    case LinkFunction::Log1p: return 1.0 / (1.0 + x);
  }
  return 1.0;
}

struct WaterFill {
  MarginalVector p;
  double log_k = 0.0;          // p_i = min(1, K exp(eta R_i))
  std::size_t saturated = 0;   // number of entries pinned at 1
};

// Closed-form projection: sort the scores, find the number s of saturated
// entries, then K = (k - s) / sum_{j >= s} exp(eta R_(j)).
inline WaterFill water_fill_detailed(std::span<const double> r, double eta, std::size_t k) {
  const std::size_t n = r.size();
  if (k < 1 || k > n) {
    throw CardinalityError("k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
  std::vector<double> z(n);
  for (std::size_t j = 0; j < n; ++j) z[j] = eta * r[order[j]];

  // tail[s] = log sum_{j >= s} exp(z_j); scores are sorted, so z[s] is the tail maximum.
  std::vector<double> tail(n + 1, -std::numeric_limits<double>::infinity());
  {
    double acc = 0.0;  // sum_{j >= s} exp(z_j - z_s), built from the back
    for (std::size_t s = n; s-- > 0;) {
      acc = (s + 1 < n) ? 1.0 + acc * std::exp(z[s + 1] - z[s]) : 1.0;
      tail[s] = z[s] + std::log(acc);
    }
  }

  auto log_k_for = [&](std::size_t s) { return std::log(static_cast<double>(k - s)) - tail[s]; };

  // Descending search from s = k-1: the largest s whose previous entry
  // saturates is the split point.
  std::size_t s_star = 0;
  for (std::size_t s = k; s-- > 1;) {
    if (log_k_for(s) + z[s - 1] >= 0.0) {
      s_star = s;
      break;
    }
  }
  if (k == n) s_star = n;

  std::vector<double> p(n, 1.0);
  double log_k = std::numeric_limits<double>::infinity();
  if (s_star < n) {
    log_k = log_k_for(s_star);
    for (std::size_t j = s_star; j < n; ++j) p[order[j]] = std::min(1.0, std::exp(log_k + z[j]));
  }
  return WaterFill{validate_marginals(p, k, 1e-9), log_k, s_star};
}

inline MarginalVector water_fill(std::span<const double> r, double eta, std::size_t k) {
  return water_fill_detailed(r, eta, k).p;
}

struct FtrlState {
  std::vector<double> grad_sum;
  double eta = 0.0;
  std::size_t k = 1;
  LinkFunction link = LinkFunction::Identity;

  static FtrlState fresh(std::size_t n, std::size_t k, double eta,
                         LinkFunction link = LinkFunction::Identity) {
    if (k < 1 || k > n) throw CardinalityError("k outside [1, N]");
    if (!(eta > 0.0)) throw ConfigError("FTRL needs eta > 0");
    return FtrlState{std::vector<double>(n, 0.0), eta, k, link};
  }
  std::size_t n() const noexcept { return grad_sum.size(); }
};

inline MarginalVector ftrl_marginals(const FtrlState& s) { return water_fill(s.grad_sum, s.eta, s.k); }

template <class URBG>
std::pair<KSet, MarginalVector> ftrl_predict(const FtrlState& s, URBG& rng) {
  MarginalVector m = ftrl_marginals(s);
  KSet set = madow_sample(m, rng);
  return {std::move(set), std::move(m)};
}

// grad_i = r_i psi'(<r, p_used>)
inline std::vector<double> ftrl_gradient(const FtrlState& s, std::span<const double> reward,
                                         const MarginalVector& p_used) {
  const double d = link_derivative(s.link, p_used.dot(reward));
  std::vector<double> g(reward.size());
  for (std::size_t i = 0; i < reward.size(); ++i) g[i] = reward[i] * d;
  return g;
}

inline void ftrl_update(FtrlState& s, std::span<const double> reward, const MarginalVector& p_used) {
  if (reward.size() != s.n() || p_used.size() != s.n()) {
    throw CardinalityError("reward / marginal length mismatch");
  }
  check_reward(reward);
  const double d = link_derivative(s.link, p_used.dot(reward));
  for (std::size_t i = 0; i < reward.size(); ++i) s.grad_sum[i] += reward[i] * d;
}

inline double k_largest_sum(std::vector<double> v, std::size_t k) {
  if (k > v.size()) throw CardinalityError("k exceeds vector length");
  if (k == 0) return 0.0;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(),
                   std::greater<double>());
  return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
}

// k ln(N/k) / eta + 2 eta sum_t ||grad_t^2||_{k,inf}
inline double theorem3_bound_from_norms(std::size_t k, std::size_t n, double eta, double norm_sum) {
  return static_cast<double>(k) * std::log(static_cast<double>(n) / static_cast<double>(k)) / eta +
         2.0 * eta * norm_sum;
}

inline double squared_k_norm(std::span<const double> g, std::size_t k) {
  std::vector<double> sq(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) sq[i] = g[i] * g[i];
  return k_largest_sum(std::move(sq), k);
}

inline double theorem3_bound(std::size_t k, std::size_t n, double eta,
                             const std::vector<std::vector<double>>& grads) {
  if (grads.empty()) throw ConfigError("gradient history is empty");
  double total = 0.0;
  for (const auto& g : grads) total += squared_k_norm(g, k);
  return theorem3_bound_from_norms(k, n, eta, total);
}

// Minimiser of k ln(N/k)/eta + 2 eta G: eta = sqrt(k ln(N/k) / (2G)).
inline double ftrl_tune_eta(std::size_t n, std::size_t k, double grad_norm_total) {
  const double c = static_cast<double>(k) * std::log(static_cast<double>(n) / static_cast<double>(k));
  if (c <= 0.0 || grad_norm_total <= 0.0) return 1.0;
  return std::sqrt(c / (2.0 * grad_norm_total));
}

}  // namespace kexperts
