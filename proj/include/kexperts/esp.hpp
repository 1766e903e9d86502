#pragma once

// Elementary symmetric polynomials of exponential weights, the Hedge
// marginal formula p_i = w_i e_{k-1}(w_{-i}) / e_k(w), and the iterative
// polynomial-coefficient engine that tracks g_t(X) = prod_i (X - w_i).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "kexperts/combinatorics.hpp"
#include "kexperts/errors.hpp"
#include "kexperts/sampling.hpp"

namespace kexperts {

// Weights stored as natural logs: w_i = exp(log_weights[i]).
struct WeightVector {
  std::vector<double> log_weights;

  static WeightVector unit(std::size_t n) { return WeightVector{std::vector<double>(n, 0.0)}; }
  std::size_t size() const noexcept { return log_weights.size(); }
  double weight(std::size_t i) const { return std::exp(log_weights[i]); }
};

// e_l(w) for l = 0..k and the leave-one-out values e_{k-1}(w_{-i}), all
// held as natural logs so that wide weight ranges neither overflow nor underflow.
struct EspTable {
  std::size_t k = 0;
  std::vector<double> log_e;
  std::vector<double> log_loo;
  std::vector<double> marginals;

  double e(std::size_t l) const { return std::exp(log_e[l]); }
  double loo(std::size_t i) const { return std::exp(log_loo[i]); }
};

namespace detail {

// Items are processed in non-increasing weight order. Every prefix entry
// P[i][l] is scaled by the product of the l largest weights and every suffix
// entry S[i][l] by the product of the l largest weights of its own suffix, so
// all transition factors lie in [0,1]. Underflow only drops terms that are
// negligible relative to the quantity being accumulated. Scaled entries lie in
// [1, binomial(n, l)], so Real only has to hold that count.
template <class Real>
EspTable compute_esp_scaled(const WeightVector& w, std::size_t k) {
  const std::size_t n = w.size();
  const double floor_x = static_cast<double>(std::log(std::numeric_limits<Real>::min()));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return w.log_weights[a] > w.log_weights[b];
  });
  const double top = w.log_weights[order[0]];
  std::vector<double> r(n);
  for (std::size_t j = 0; j < n; ++j) r[j] = w.log_weights[order[j]] - top;

  // d[j] = w_(j) / w_(j-1) <= 1
  std::vector<Real> d(n, 1);
  for (std::size_t j = 1; j < n; ++j) d[j] = std::exp(static_cast<Real>(r[j] - r[j - 1]));
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) cum[j + 1] = cum[j] + r[j];

  const std::size_t width = k + 1;
  // Suffix table, row i covers ranks i..n-1.
  std::vector<Real> suf((n + 1) * width, 0);
  suf[n * width + 0] = 1;
  for (std::size_t i = n; i-- > 0;) {
    Real* row = &suf[i * width];
    const Real* next = &suf[(i + 1) * width];
    row[0] = 1;
    const std::size_t lmax = std::min(k, n - i);
    Real h = 1;  // exp(r[i+l] - r[i])
    for (std::size_t l = 1; l <= lmax; ++l) {
      Real v = next[l - 1];
      if (l <= n - i - 1) {
        h *= d[i + l];
        v += next[l] * h;
      }
      row[l] = v;
    }
  }

  EspTable out;
  out.k = k;
  out.log_loo.assign(n, 0.0);
  out.marginals.assign(n, 0.0);

  std::vector<Real> numer(n, 0);
  std::vector<Real> pre(width, 0);
  std::vector<Real> gain(width, 1);  // gain[l] = exp(r[i] - r[l-1])
  pre[0] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    // Leave-one-out for rank i: prefix row i (ranks < i) with suffix row i+1.
    const Real* next = &suf[(i + 1) * width];
    const double nu = (i + 1 >= k) ? cum[k - 1] : cum[k] - r[i];
    const std::size_t amax = std::min(i, k - 1);
    Real acc = 0;
    for (std::size_t a = 0; a <= amax; ++a) {
      const std::size_t b = k - 1 - a;
      if (b > n - i - 1) continue;
      const Real pv = pre[a];
      const Real sv = next[b];
      if (pv == 0 || sv == 0) continue;
      const double x = cum[a] + (cum[i + 1 + b] - cum[i + 1]) - nu;
      if (x < floor_x) continue;
      acc += pv * sv * std::exp(static_cast<Real>(std::min(x, 0.0)));
    }
    out.log_loo[order[i]] =
        nu + top * static_cast<double>(k - 1) + static_cast<double>(std::log(acc));
    const double lead = (i + 1 >= k) ? r[i] - r[k - 1] : 0.0;
    if (lead >= floor_x) numer[order[i]] = acc * std::exp(static_cast<Real>(lead));

    // Extend the prefix by rank i.
    const std::size_t lmax = std::min(i + 1, k);
    for (std::size_t l = 1; l <= std::min(i, k); ++l) gain[l] *= d[i];
    if (i + 1 <= k) gain[i + 1] = 1;
    for (std::size_t l = lmax; l >= 1; --l) pre[l] += gain[l] * pre[l - 1];
  }

  out.log_e.assign(width, 0.0);
  for (std::size_t l = 0; l <= k; ++l) {
    out.log_e[l] = cum[l] + top * static_cast<double>(l) + static_cast<double>(std::log(pre[l]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.marginals[i] = std::min(1.0, static_cast<double>(numer[i] / pre[k]));
  }
  return out;
}

inline EspTable compute_esp(const WeightVector& w, std::size_t k) {
  const std::size_t n = w.size();
  if (k < 1 || k > n) {
    throw CardinalityError("k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  // Largest scaled entry is binomial(n, min(k, n/2)); keep a margin for the
  // products formed in the leave-one-out sums.
  const double log_count = log_binomial(n, std::min(k, n / 2));
  if (log_count < 600.0) return compute_esp_scaled<double>(w, k);
  if (log_count < 11000.0 && std::numeric_limits<long double>::max_exponent > 10000) {
    return compute_esp_scaled<long double>(w, k);
  }
  throw InstanceTooLarge("binomial(" + std::to_string(n) + ", " + std::to_string(k) +
                         ") exceeds the extended floating-point range");
}

}  // namespace detail

inline EspTable esp_prefix_suffix(const WeightVector& w, std::size_t k) {
  return detail::compute_esp(w, k);
}

// Hedge-over-k-sets marginals via the stabilised O(Nk) dynamic program.
inline MarginalVector hedge_marginals(const WeightVector& w, std::size_t k) {
  EspTable t = detail::compute_esp(w, k);
  return validate_marginals(t.marginals, k, 1e-9);
}

// ---------------------------------------------------------------------------
// Coefficients a_0..a_N of g_t(X) = prod_i (X - w_t(i)).

struct CoeffState {
  std::vector<double> a;
  double eta = 0.0;
  std::size_t n = 0;
};

// Unit weights: g_0(X) = (X - 1)^N, a_j = (-1)^{N-j} C(N, j).
inline CoeffState coeffs_init(std::size_t n, double eta) {
  if (n < 1) throw CardinalityError("coefficient engine needs n >= 1");
  CoeffState s;
  s.n = n;
  s.eta = eta;
  s.a.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    const double sign = ((n - j) % 2 == 0) ? 1.0 : -1.0;
    s.a[j] = sign * binomial(n, j);
  }
  return s;
}

// Direct expansion of prod_i (X - w_i); used to rebuild after degradation.
inline CoeffState coeffs_rebuild(const WeightVector& w, double eta) {
  const std::size_t n = w.size();
  CoeffState s;
  s.n = n;
  s.eta = eta;
  s.a.assign(n + 1, 0.0);
  s.a[0] = 1.0;
  std::size_t deg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.weight(i);
    // multiply current polynomial (degree deg) by (X - wi)
    for (std::size_t j = deg + 2; j-- > 0;) {
      const double shifted = (j == 0) ? 0.0 : s.a[j - 1];
      s.a[j] = shifted - wi * s.a[j];
    }
    ++deg;
  }
  return s;
}

// Item f's weight w_prev is multiplied by `growth` (e^eta for a unit reward):
//   a'_0 = growth * a_0
//   a'_j = (a'_{j-1} - a_{j-1}) / w_prev + growth * a_j
// The same identity also runs downward from the monic top coefficient,
//   a'_{j-1} = w_prev * (a'_j - growth * a_j) + a_{j-1}.
// Each direction cancels where the other does not, so both are evaluated with a
// running error bound and the better estimate is kept per coefficient.
inline CoeffState coeffs_update(const CoeffState& state, std::size_t f, double w_prev,
                                double growth) {
  if (f >= state.n) throw CardinalityError("item index out of range");
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const std::size_t n = state.n;
  const std::vector<double>& a = state.a;
  const double inv = 1.0 / w_prev;

  std::vector<double> up(n + 1), up_err(n + 1);
  up[0] = growth * a[0];
  up_err[0] = eps * std::abs(up[0]);
  for (std::size_t j = 1; j <= n; ++j) {
    const double diff = up[j - 1] - a[j - 1];
    up[j] = inv * diff + growth * a[j];
    up_err[j] = inv * (up_err[j - 1] + eps * (std::abs(up[j - 1]) + std::abs(a[j - 1]))) +
                eps * (std::abs(up[j]) + 2.0 * std::abs(growth * a[j]));
  }

  std::vector<double> down(n + 1), down_err(n + 1);
  down[n] = a[n];
  down_err[n] = 0.0;
  for (std::size_t j = n; j >= 1; --j) {
    const double diff = down[j] - growth * a[j];
    down[j - 1] = w_prev * diff + a[j - 1];
    down_err[j - 1] =
        w_prev * (down_err[j] + eps * (std::abs(down[j]) + 2.0 * std::abs(growth * a[j]))) +
        eps * (std::abs(down[j - 1]) + std::abs(a[j - 1]));
  }

  CoeffState next = state;
  for (std::size_t j = 0; j <= n; ++j) {
    const bool use_down = std::isfinite(down[j]) && (!std::isfinite(up[j]) || down_err[j] < up_err[j]);
    next.a[j] = use_down ? down[j] : up[j];
  }
  return next;
}

inline CoeffState coeffs_update(const CoeffState& state, std::size_t f, double w_prev) {
  return coeffs_update(state, f, w_prev, std::exp(state.eta));
}

// e_l(w) = (-1)^l a_{N-l}
inline double esp_from_coeffs(const CoeffState& s, std::size_t l) {
  const double sign = (l % 2 == 0) ? 1.0 : -1.0;
  return sign * s.a[s.n - l];
}

// p(i) = sum_{j=0}^{N-k} a_j w_i^{-(N-k-j)} / a_{N-k}, evaluated by Horner.
// The equivalent top-down division, p(i) = -w_i sum_{m>N-k} a_m w_i^{m-N+k-1} / a_{N-k},
// is used instead when its terms cancel less.
inline MarginalVector marginals_from_coeffs(const CoeffState& s, const WeightVector& w,
                                            std::size_t k) {
  const std::size_t n = s.n;
  if (w.size() != n) throw CardinalityError("weight vector does not match coefficient state");
  if (k < 1 || k > n) throw CardinalityError("k outside [1, N]");
  const std::size_t top = n - k;
  const double denom = s.a[top];
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.weight(i);
    const double inv = 1.0 / wi;
    double acc = s.a[0];
    double mag = std::abs(s.a[0]);
    for (std::size_t j = 1; j <= top; ++j) {
      acc = acc * inv + s.a[j];
      mag = mag * inv + std::abs(s.a[j]);
    }
    double down = s.a[n];
    double down_mag = std::abs(s.a[n]);
    for (std::size_t m = n - 1; m > top; --m) {
      down = down * wi + s.a[m];
      down_mag = down_mag * wi + std::abs(s.a[m]);
    }
    down *= -wi;
    down_mag *= wi;
    const double cond_up = mag / std::abs(acc);
    const double cond_down = down_mag / std::abs(down);
    const bool use_down = std::isfinite(down) && !(cond_up <= cond_down);
    p[i] = (use_down ? down : acc) / denom;
  }
  try {
    return validate_marginals(p, k, kFeasibilityTolerance);
  } catch (const InfeasibleMarginals& e) {
    throw NumericalDegradation(std::string("coefficient marginals infeasible: ") + e.what());
  }
}

// Keeps weights and coefficients in lockstep. On NumericalDegradation the
// coefficients are rebuilt by direct expansion; if that also degrades the
// stabilised dynamic program answers instead.
class CoeffEngine {
 public:
  CoeffEngine(std::size_t n, double eta) : weights_(WeightVector::unit(n)), state_(coeffs_init(n, eta)) {}

  void bump(std::size_t f, double reward = 1.0) {
    if (reward == 0.0) return;
    const double w_prev = weights_.weight(f);
    weights_.log_weights[f] += state_.eta * reward;
    state_ = coeffs_update(state_, f, w_prev, std::exp(state_.eta * reward));
  }

  MarginalVector marginals(std::size_t k) {
    try {
      return marginals_from_coeffs(state_, weights_, k);
    } catch (const NumericalDegradation&) {
      ++rebuilds_;
      state_ = coeffs_rebuild(weights_, state_.eta);
    }
    try {
      return marginals_from_coeffs(state_, weights_, k);
    } catch (const NumericalDegradation&) {
      ++dp_fallbacks_;
      return hedge_marginals(weights_, k);
    }
  }

  const WeightVector& weights() const noexcept { return weights_; }
  const CoeffState& state() const noexcept { return state_; }
  std::size_t rebuilds() const noexcept { return rebuilds_; }
  std::size_t dp_fallbacks() const noexcept { return dp_fallbacks_; }

 private:
  WeightVector weights_;
  CoeffState state_;
  std::size_t rebuilds_ = 0;
  std::size_t dp_fallbacks_ = 0;
};

}  // namespace kexperts
