#pragma once

// Comparison policies: LRU and LFU caches, Follow-the-Perturbed-Leader with
// Gaussian noise, and Hedge run explicitly over all binomial(N,k) k-sets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "kexperts/combinatorics.hpp"
#include "kexperts/errors.hpp"
#include "kexperts/sampling.hpp"

namespace kexperts {

// Perfect LFU keeps a count for every item ever requested; in-cache LFU
// forgets an item's count when it is evicted.
enum class LfuMode { Perfect, InCache };

// Residency plus per-item bookkeeping. Starts empty; fills up to k on misses.
struct CacheState {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::size_t> resident;     // kept sorted
  std::vector<std::size_t> last_use;     // round of the latest request, 0 = never
  std::vector<std::size_t> frequency;    // request counts, never aged
  std::size_t clock = 0;

  static CacheState empty(std::size_t n, std::size_t k) {
    if (k < 1 || k > n) throw CardinalityError("k outside [1, N]");
    return CacheState{n, k, {}, std::vector<std::size_t>(n, 0), std::vector<std::size_t>(n, 0), 0};
  }

  bool contains(std::size_t item) const {
    return std::binary_search(resident.begin(), resident.end(), item);
  }
  KSet prediction() const { return KSet{resident}; }
};

namespace detail {

template <class Less>
KSet cache_step(CacheState& s, std::size_t item, Less victim_less, bool forget_evicted = false) {
  if (item >= s.n) throw CardinalityError("item out of range");
  KSet before = s.prediction();
  ++s.clock;
  ++s.frequency[item];
  if (!s.contains(item)) {
    if (s.resident.size() == s.k) {
      auto victim = std::min_element(s.resident.begin(), s.resident.end(), victim_less);
      if (forget_evicted) s.frequency[*victim] = 0;
      s.resident.erase(victim);
    }
    s.resident.insert(std::upper_bound(s.resident.begin(), s.resident.end(), item), item);
  }
  s.last_use[item] = s.clock;
  return before;
}

}  // namespace detail

// Returns the residency before the request is revealed, then serves it.
inline KSet lru_step(CacheState& s, std::size_t item) {
  return detail::cache_step(s, item, [&](std::size_t a, std::size_t b) { return s.last_use[a] < s.last_use[b]; });
}

// Evicts the least frequent resident; ties go to the least recently used.
inline KSet lfu_step(CacheState& s, std::size_t item, LfuMode mode = LfuMode::Perfect) {
  return detail::cache_step(
      s, item,
      [&](std::size_t a, std::size_t b) {
        if (s.frequency[a] != s.frequency[b]) return s.frequency[a] < s.frequency[b];
        return s.last_use[a] < s.last_use[b];
      },
      mode == LfuMode::InCache);
}

// Top-k of R + sigma * N(0,1); ties by lower index.
template <class URBG>
KSet ftpl_predict(std::span<const double> r, double sigma, std::size_t k, URBG& rng) {
  const std::size_t n = r.size();
  if (k < 1 || k > n) throw CardinalityError("k outside [1, N]");
  if (!(sigma > 0.0)) throw ConfigError("FTPL needs sigma > 0");
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = r[i] + sigma * g(rng);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    return score[a] != score[b] ? score[a] > score[b] : a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(), better);
  std::vector<std::size_t> top(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(top.begin(), top.end());
  return KSet{std::move(top)};
}

// sigma = sqrt(T / (k ln(Ne/k)))
inline double ftpl_default_sigma(std::size_t horizon, std::size_t n, std::size_t k) {
  const double c = static_cast<double>(k) * (std::log(static_cast<double>(n) / static_cast<double>(k)) + 1.0);
  return std::sqrt(static_cast<double>(horizon) / c);
}

struct ExpandedHedge {
  std::vector<std::vector<std::size_t>> sets;  // lexicographic
  std::vector<double> probs;
  std::vector<double> marginals;
};

// Hedge over every k-set S with weight exp(eta * #hits inside S).
inline ExpandedHedge expanded_hedge_oracle(std::span<const std::size_t> history, double eta,
                                           std::size_t n, std::size_t k) {
  if (k < 1 || k > n) throw CardinalityError("k outside [1, N]");
  if (binomial(n, k) > 1e6) throw InstanceTooLarge("binomial(N, k) exceeds 1e6");
  std::vector<double> hits(n, 0.0);
  for (std::size_t y : history) {
    if (y >= n) throw CardinalityError("history item out of range");
    hits[y] += 1.0;
  }
  ExpandedHedge out;
  std::vector<double> logw;
  for_each_combination(n, k, [&](const std::vector<std::size_t>& s) {
    double c = 0.0;
    for (std::size_t i : s) c += hits[i];
    out.sets.push_back(s);
    logw.push_back(eta * c);
  });
  const double mx = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  out.probs.resize(logw.size());
  for (std::size_t s = 0; s < logw.size(); ++s) z += out.probs[s] = std::exp(logw[s] - mx);
  out.marginals.assign(n, 0.0);
  for (std::size_t s = 0; s < logw.size(); ++s) {
    out.probs[s] /= z;
    for (std::size_t i : out.sets[s]) out.marginals[i] += out.probs[s];
  }
  return out;
}

}  // namespace kexperts
