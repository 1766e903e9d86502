#pragma once

// Pairwise rewards through super-items: every unordered pair {i, j} is one
// expert, a k-set policy runs over the binomial(N,2) super-items, and the
// predicted item set is the union of the chosen pairs' endpoints.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "kexperts/combinatorics.hpp"
#include "kexperts/errors.hpp"
#include "kexperts/ftrl.hpp"
#include "kexperts/sage_hedge.hpp"
#include "kexperts/sampling.hpp"

namespace kexperts {

inline std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

// Lexicographic by (min, max): {0,1}=0, {0,2}=1, ..., {n-2,n-1}=C(n,2)-1.
inline std::size_t pair_encode(std::size_t i, std::size_t j, std::size_t n) {
  if (i == j) throw InvalidPair("pair endpoints must differ");
  if (i >= n || j >= n) throw InvalidPair("pair endpoint out of range");
  if (i > j) std::swap(i, j);
  // pairs with first endpoint < i: sum_{a<i} (n-1-a)
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

inline std::pair<std::size_t, std::size_t> pair_decode(std::size_t idx, std::size_t n) {
  if (idx >= pair_count(n)) throw InvalidPair("super-item index out of range");
  std::size_t i = 0;
  std::size_t row = n - 1;
  while (idx >= row) {
    idx -= row;
    ++i;
    --row;
  }
  return {i, i + 1 + idx};
}

// Least m with binomial(m, 2) >= k.
inline std::size_t min_union_size(std::size_t k) {
  std::size_t m = 2;
  while (pair_count(m) < k) ++m;
  return m;
}

inline std::size_t pairwise_reward(std::span<const std::size_t> items, std::pair<std::size_t, std::size_t> req) {
  const bool a = std::find(items.begin(), items.end(), req.first) != items.end();
  const bool b = std::find(items.begin(), items.end(), req.second) != items.end();
  return (a && b) ? 1 : 0;
}

enum class PairBase { Ftrl, SageHedge };

struct PairwisePrediction {
  std::vector<std::size_t> items;  // sorted union of endpoints
  KSet super_set;
  MarginalVector marginals;        // over super-items
};

class PairwisePolicy {
 public:
  PairwisePolicy(std::size_t n, std::size_t k, double eta, PairBase base = PairBase::Ftrl)
      : n_(n), k_(k), base_(base) {
    if (n < 2) throw CardinalityError("pairwise policy needs n >= 2");
    const std::size_t m = pair_count(n);
    if (k < 1 || k > m) throw CardinalityError("k outside [1, C(N,2)]");
    if (base == PairBase::Ftrl) {
      ftrl_ = FtrlState::fresh(m, k, eta);
    } else {
      hedge_ = SageHedgeState::fresh(m, k, eta);
    }
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t super_items() const noexcept { return pair_count(n_); }

  MarginalVector marginals() const {
    return base_ == PairBase::Ftrl ? ftrl_marginals(ftrl_) : sage_marginals(hedge_);
  }

  template <class URBG>
  PairwisePrediction predict(URBG& rng) const {
    MarginalVector m = marginals();
    KSet s = madow_sample(m, rng);
    std::vector<std::size_t> items;
    items.reserve(2 * k_);
    for (std::size_t idx : s.members) {
      auto [i, j] = pair_decode(idx, n_);
      items.push_back(i);
      items.push_back(j);
    }
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    return {std::move(items), std::move(s), std::move(m)};
  }

  // One-hot reward on the requested pair's super-item.
  void update(std::pair<std::size_t, std::size_t> req, const MarginalVector& played) {
    const std::size_t idx = pair_encode(req.first, req.second, n_);
    if (base_ == PairBase::Ftrl) {
      ftrl_.grad_sum[idx] += link_derivative(ftrl_.link, played[idx]);
    } else {
      sage_update_one_hot(hedge_, idx);
    }
  }

 private:
  std::size_t n_;
  std::size_t k_;
  PairBase base_;
  FtrlState ftrl_;
  SageHedgeState hedge_;
};

struct DenseSubgraph {
  std::vector<std::size_t> vertices;
  std::size_t covered = 0;
};

// Exact densest k-subgraph by enumeration; repeated edges count repeatedly.
inline DenseSubgraph densest_ksubgraph_bruteforce(std::span<const std::pair<std::size_t, std::size_t>> edges,
                                                  std::size_t n, std::size_t k) {
  if (k < 1 || k > n) throw CardinalityError("k outside [1, n]");
  if (binomial(n, k) > 1e7) throw InstanceTooLarge("binomial(n, k) exceeds 1e7");
  // multiplicity matrix
  std::vector<std::size_t> mult(n * n, 0);
  for (auto [a, b] : edges) {
    if (a >= n || b >= n || a == b) throw InvalidPair("edge endpoint invalid");
    ++mult[std::min(a, b) * n + std::max(a, b)];
  }
  DenseSubgraph best;
  bool first = true;
  for_each_combination(n, k, [&](const std::vector<std::size_t>& s) {
    std::size_t c = 0;
    for (std::size_t x = 0; x < s.size(); ++x) {
      for (std::size_t y = x + 1; y < s.size(); ++y) c += mult[s[x] * n + s[y]];
    }
    if (first || c > best.covered) {
      best.vertices = s;
      best.covered = c;
      first = false;
    }
  });
  return best;
}

// 2 sqrt(k l* ln(N^2 e / 2k)) + 2k ln(N^2 e / 2k)
inline double improper_bound(std::size_t k, std::size_t n, double l_star) {
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  const double c = std::log(nn * nn / (2.0 * kk)) + 1.0;
  return 2.0 * std::sqrt(kk * l_star * c) + 2.0 * kk * c;
}

}  // namespace kexperts
