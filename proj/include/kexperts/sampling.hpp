#pragma once

// Feasible marginal inclusion vectors and Madow's systematic k-set sampler.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kexperts/errors.hpp"

namespace kexperts {

inline constexpr double kFeasibilityTolerance = 1e-6;

// A size-k subset of {0..N-1}; members are kept strictly increasing.
struct KSet {
  std::vector<std::size_t> members;

  std::size_t size() const noexcept { return members.size(); }
  bool contains(std::size_t i) const {
    return std::binary_search(members.begin(), members.end(), i);
  }
  bool operator==(const KSet&) const = default;
};

inline bool is_valid_kset(const KSet& s, std::size_t n, std::size_t k) {
  if (s.members.size() != k) return false;
  for (std::size_t j = 0; j < s.members.size(); ++j) {
    if (s.members[j] >= n) return false;
    if (j > 0 && s.members[j] <= s.members[j - 1]) return false;
  }
  return true;
}

// Inclusion probabilities p in [0,1]^N with sum(p) == k. Only obtainable
// through validate_marginals, so every instance is feasible.
class MarginalVector {
 public:
  std::span<const double> probs() const noexcept { return probs_; }
  const std::vector<double>& values() const noexcept { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::size_t size() const noexcept { return probs_.size(); }
  std::size_t k() const noexcept { return k_; }
  // L1 distance between the raw input and the stored (repaired) vector.
  double correction() const noexcept { return correction_; }

  double dot(std::span<const double> r) const {
    double s = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) s += probs_[i] * r[i];
    return s;
  }

 private:
  MarginalVector(std::vector<double> p, std::size_t k, double corr)
      : probs_(std::move(p)), k_(k), correction_(corr) {}

  friend MarginalVector validate_marginals(std::span<const double>, std::size_t, double);

  std::vector<double> probs_;
  std::size_t k_ = 0;
  double correction_ = 0.0;
};

namespace detail {

// Clamp to [0,1], then rescale the unsaturated mass until the sum is k.
inline std::vector<double> clamp_and_rescale(std::span<const double> raw, std::size_t k) {
  const double target_total = static_cast<double>(k);
  const double exact_tol = 1e-12 * std::max(1.0, target_total);
  std::vector<double> q(raw.begin(), raw.end());
  for (double& v : q) v = std::clamp(v, 0.0, 1.0);

  for (std::size_t iter = 0; iter <= q.size(); ++iter) {
    double ones = 0.0;
    double free_mass = 0.0;
    std::size_t free_count = 0;
    for (double v : q) {
      if (v >= 1.0) {
        ones += 1.0;
      } else {
        free_mass += v;
        ++free_count;
      }
    }
    const double target = target_total - ones;
    if (std::abs(ones + free_mass - target_total) <= exact_tol) break;
    if (free_count == 0) break;
    if (free_mass > 0.0) {
      const double scale = target / free_mass;
      for (double& v : q) {
        if (v < 1.0) v = std::min(1.0, v * scale);
      }
    } else {
      const double share = target / static_cast<double>(free_count);
      for (double& v : q) {
        if (v < 1.0) v = std::clamp(share, 0.0, 1.0);
      }
    }
  }
  return q;
}

}  // namespace detail

// Checks the consistency condition (entries in [0,1], sum k) within `tol`,
// then repairs the input to exact feasibility.
inline MarginalVector validate_marginals(std::span<const double> probs, std::size_t k,
                                         double tol = kFeasibilityTolerance) {
  const std::size_t n = probs.size();
  if (n == 0) throw CardinalityError("marginal vector is empty");
  if (k < 1 || k > n) {
    throw CardinalityError("k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = probs[i];
    if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) {
      throw InfeasibleMarginals("entry " + std::to_string(i) + " = " + std::to_string(v) +
                                " outside [0,1]");
    }
    sum += v;
  }
  if (std::abs(sum - static_cast<double>(k)) > tol) {
    throw InfeasibleMarginals("marginals sum to " + std::to_string(sum) + ", expected " +
                              std::to_string(k));
  }
  std::vector<double> q = detail::clamp_and_rescale(probs, k);
  double corr = 0.0;
  for (std::size_t i = 0; i < n; ++i) corr += std::abs(q[i] - probs[i]);
  return MarginalVector(std::move(q), k, corr);
}

inline MarginalVector validate_marginals(const std::vector<double>& probs, std::size_t k,
                                         double tol = kFeasibilityTolerance) {
  return validate_marginals(std::span<const double>(probs), k, tol);
}

// Madow's systematic sampling: one uniform U, select j whenever
// Pi_{j-1} <= U + i < Pi_j for i = 0..k-1.
template <class URBG>
KSet madow_sample(const MarginalVector& m, URBG& rng) {
  const std::size_t n = m.size();
  const std::size_t k = m.k();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + m[j];
  prefix[n] = static_cast<double>(k);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);

  KSet out;
  out.members.reserve(k);
  std::size_t j = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double target = u + static_cast<double>(i);
    while (j < n && prefix[j + 1] <= target) ++j;
    // Rounding can only push the cursor past the last feasible slot; keep k distinct picks.
    j = std::min(j, n - (k - i));
    out.members.push_back(j);
    ++j;
  }
  return out;
}

template <class URBG>
std::vector<double> empirical_inclusion(const MarginalVector& m, std::size_t draws, URBG& rng) {
  std::vector<double> freq(m.size(), 0.0);
  if (draws == 0) return freq;
  std::vector<std::size_t> counts(m.size(), 0);
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t j : madow_sample(m, rng).members) ++counts[j];
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    freq[i] = static_cast<double>(counts[i]) / static_cast<double>(draws);
  }
  return freq;
}

}  // namespace kexperts
