#pragma once

// SAGE with a Hedge base policy over k-sets: exponential weights per item,
// marginals from elementary symmetric polynomials, Madow sampling.

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>

#include "kexperts/environments.hpp"
#include "kexperts/esp.hpp"
#include "kexperts/sampling.hpp"

namespace kexperts {

struct SageHedgeState {
  WeightVector weights;
  std::size_t k = 1;
  double eta = 0.0;
  std::size_t round = 0;
  double cumulative_expected_reward = 0.0;

  static SageHedgeState fresh(std::size_t n, std::size_t k, double eta) {
    if (k < 1 || k > n) throw CardinalityError("k outside [1, N]");
    return SageHedgeState{WeightVector::unit(n), k, eta, 0, 0.0};
  }
  std::size_t n() const noexcept { return weights.size(); }
};

inline MarginalVector sage_marginals(const SageHedgeState& s) { return hedge_marginals(s.weights, s.k); }

template <class URBG>
std::pair<KSet, MarginalVector> sage_predict(const SageHedgeState& s, URBG& rng) {
  MarginalVector m = sage_marginals(s);
  KSet set = madow_sample(m, rng);
  return {std::move(set), std::move(m)};
}

// w_i <- w_i exp(eta r_i), kept as log-weights.
inline void sage_update(SageHedgeState& s, std::span<const double> reward) {
  if (reward.size() != s.n()) throw CardinalityError("reward vector has the wrong length");
  check_reward(reward);
  for (std::size_t i = 0; i < reward.size(); ++i) s.weights.log_weights[i] += s.eta * reward[i];
  ++s.round;
}

inline void sage_update_one_hot(SageHedgeState& s, std::size_t item) {
  if (item >= s.n()) throw CardinalityError("item out of range");
  s.weights.log_weights[item] += s.eta;
  ++s.round;
}

// ln(Ne/k), the per-slot log count in binomial(N,k) <= (Ne/k)^k.
inline double log_ne_over_k(std::size_t n, std::size_t k) {
  return std::log(static_cast<double>(n) / static_cast<double>(k)) + 1.0;
}

// sqrt(2 k l* ln(Ne/k)) + k ln(Ne/k)
inline double small_loss_bound(std::size_t n, std::size_t k, double l_star) {
  const double c = static_cast<double>(k) * log_ne_over_k(n, k);
  return std::sqrt(2.0 * l_star * c) + c;
}

// eta = sqrt(2 ln(n_meta) / T)
inline double tune_eta(std::size_t horizon, double log_n_meta) {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  return std::sqrt(2.0 * log_n_meta / static_cast<double>(horizon));
}

inline double tune_eta(std::size_t horizon, std::size_t n, std::size_t k) {
  return tune_eta(horizon, static_cast<double>(k) * log_ne_over_k(n, k));
}

// Doubling trick: epoch j covers rounds 2^j .. 2^{j+1}-1 (1-based), so
// restarts happen at rounds 1, 2, 4, 8, ...; each epoch is tuned for its length.
class DoublingSageHedge {
 public:
  DoublingSageHedge(std::size_t n, std::size_t k)
      : n_(n), k_(k), state_(SageHedgeState::fresh(n, k, tune_eta(1, n, k))) {}

  const SageHedgeState& state() const noexcept { return state_; }
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t epoch_length() const noexcept { return std::size_t{1} << epoch_; }
  static bool restarts_at(std::size_t round_one_based) {
    return round_one_based > 0 && (round_one_based & (round_one_based - 1)) == 0;
  }

  MarginalVector marginals() const { return sage_marginals(state_); }

  template <class URBG>
  std::pair<KSet, MarginalVector> predict(URBG& rng) const {
    return sage_predict(state_, rng);
  }

  void update(std::span<const double> reward) {
    sage_update(state_, reward);
    ++played_;
    if (restarts_at(played_ + 1)) {
      ++epoch_;
      const double total = state_.cumulative_expected_reward;
      state_ = SageHedgeState::fresh(n_, k_, tune_eta(epoch_length(), n_, k_));
      state_.cumulative_expected_reward = total;
    }
  }

 private:
  std::size_t n_;
  std::size_t k_;
  SageHedgeState state_;
  std::size_t epoch_ = 0;
  std::size_t played_ = 0;
};

}  // namespace kexperts
