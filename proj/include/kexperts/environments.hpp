#pragma once

// Reward variants, synthetic request generators and CSV trace files.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "kexperts/errors.hpp"

namespace kexperts {

// Per-item rewards in [0,1].
struct RewardVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  static RewardVector one_hot(std::size_t n, std::size_t item) {
    RewardVector r{std::vector<double>(n, 0.0)};
    r.values.at(item) = 1.0;
    return r;
  }
};

inline void check_reward(std::span<const double> r) {
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(r[i] >= 0.0 && r[i] <= 1.0)) {
      throw RewardOutOfRange("reward[" + std::to_string(i) + "] = " + std::to_string(r[i]) +
                             " outside [0,1]");
    }
  }
}

enum class Variant { Sum, Max, Lp, Pair };

inline Variant parse_variant(std::string_view s) {
  if (s == "sum") return Variant::Sum;
  if (s == "max") return Variant::Max;
  if (s == "lp") return Variant::Lp;
  if (s == "pair") return Variant::Pair;
  throw UnknownVariant("unknown reward variant '" + std::string(s) + "'");
}

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Sum: return "sum";
    case Variant::Max: return "max";
    case Variant::Lp: return "lp";
    case Variant::Pair: return "pair";
  }
  return "?";
}

// q(S, r) for the four reward variants. Pair sums r_i r_j over unordered
// distinct pairs inside S.
inline double reward_eval(Variant v, std::span<const std::size_t> s, std::span<const double> r,
                          double p = 2.0) {
  if (s.empty()) throw CardinalityError("reward_eval needs a nonempty set");
  switch (v) {
    case Variant::Sum: {
      double total = 0.0;
      for (std::size_t i : s) total += r[i];
      return total;
    }
    case Variant::Max: {
      double best = 0.0;
      for (std::size_t i : s) best = std::max(best, r[i]);
      return best;
    }
    case Variant::Lp: {
      double total = 0.0;
      for (std::size_t i : s) total += std::pow(r[i], p);
      return std::pow(total, 1.0 / p);
    }
    case Variant::Pair: {
      double total = 0.0;
      for (std::size_t a = 0; a < s.size(); ++a) {
        for (std::size_t b = a + 1; b < s.size(); ++b) total += r[s[a]] * r[s[b]];
      }
      return total;
    }
  }
  throw UnknownVariant("unhandled variant");
}

enum class RoundKind { OneHot, Pair, Dense };

inline RoundKind parse_round_kind(std::string_view s) {
  if (s == "onehot") return RoundKind::OneHot;
  if (s == "pair") return RoundKind::Pair;
  if (s == "dense") return RoundKind::Dense;
  throw ConfigError("unknown trace kind '" + std::string(s) + "'");
}

// A request log. Exactly one of items / pairs / dense is populated,
// according to `kind`.
struct Trace {
  std::size_t n = 0;
  RoundKind kind = RoundKind::OneHot;
  std::vector<long long> timestamps;
  std::vector<std::size_t> items;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::vector<double>> dense;

  std::size_t rounds() const noexcept { return timestamps.size(); }

  RewardVector reward(std::size_t t) const {
    switch (kind) {
      case RoundKind::OneHot:
        return RewardVector::one_hot(n, items[t]);
      case RoundKind::Pair: {
        RewardVector r{std::vector<double>(n, 0.0)};
        r.values[pairs[t].first] = 1.0;
        r.values[pairs[t].second] = 1.0;
        return r;
      }
      case RoundKind::Dense:
        return RewardVector{dense[t]};
    }
    return {};
  }

  bool operator==(const Trace&) const = default;
};

inline Trace make_onehot_trace(std::size_t n, std::vector<std::size_t> items) {
  Trace tr;
  tr.n = n;
  tr.kind = RoundKind::OneHot;
  tr.timestamps.resize(items.size());
  std::iota(tr.timestamps.begin(), tr.timestamps.end(), 1LL);
  tr.items = std::move(items);
  return tr;
}

// i.i.d. requests with P(item i) proportional to (i+1)^-exponent.
template <class URBG>
Trace gen_zipf_onehot(std::size_t n, std::size_t t, double exponent, URBG& rng) {
  if (exponent < 0.0) throw ConfigError("Zipf exponent must be >= 0");
  if (n == 0) throw CardinalityError("need n >= 1");
  std::vector<double> mass(n);
  for (std::size_t i = 0; i < n; ++i) mass[i] = std::pow(static_cast<double>(i + 1), -exponent);
  std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
  std::vector<std::size_t> items(t);
  for (auto& y : items) y = pick(rng);
  return make_onehot_trace(n, std::move(items));
}

inline std::vector<double> zipf_mass(std::size_t n, double exponent) {
  std::vector<double> mass(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += mass[i] = std::pow(static_cast<double>(i + 1), -exponent);
  for (double& m : mass) m /= z;
  return mass;
}

// Dense rewards with i.i.d. Bernoulli(p) entries.
template <class URBG>
Trace gen_bernoulli_ensemble(std::size_t n, std::size_t t, double p, URBG& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("Bernoulli parameter outside [0,1]");
  Trace tr;
  tr.n = n;
  tr.kind = RoundKind::Dense;
  tr.timestamps.resize(t);
  std::iota(tr.timestamps.begin(), tr.timestamps.end(), 1LL);
  std::bernoulli_distribution coin(p);
  tr.dense.assign(t, std::vector<double>(n, 0.0));
  for (auto& row : tr.dense) {
    for (double& v : row) v = coin(rng) ? 1.0 : 0.0;
  }
  return tr;
}

// Round t rewards position j with 1 - |j - i_t| / N.
inline Trace gen_distance_reward(std::size_t n, std::span<const std::size_t> requests) {
  Trace tr;
  tr.n = n;
  tr.kind = RoundKind::Dense;
  tr.timestamps.resize(requests.size());
  std::iota(tr.timestamps.begin(), tr.timestamps.end(), 1LL);
  tr.dense.reserve(requests.size());
  const double nn = static_cast<double>(n);
  for (std::size_t req : requests) {
    if (req >= n) throw CardinalityError("requested item out of range");
    std::vector<double> row(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double dist = (j > req) ? static_cast<double>(j - req) : static_cast<double>(req - j);
      row[j] = 1.0 - dist / nn;
    }
    tr.dense.push_back(std::move(row));
  }
  return tr;
}

// Pair requests: super-item ranks drawn from Zipf(exponent) and mapped onto
// unordered pairs through a random permutation.
template <class URBG>
Trace gen_zipf_pairs(std::size_t n, std::size_t t, double exponent, URBG& rng) {
  if (n < 2) throw CardinalityError("pair traces need n >= 2");
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) all.emplace_back(i, j);
  }
  std::shuffle(all.begin(), all.end(), rng);
  const auto mass = zipf_mass(all.size(), exponent);
  std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
  Trace tr;
  tr.n = n;
  tr.kind = RoundKind::Pair;
  tr.timestamps.resize(t);
  std::iota(tr.timestamps.begin(), tr.timestamps.end(), 1LL);
  tr.pairs.resize(t);
  for (auto& pr : tr.pairs) pr = all[pick(rng)];
  return tr;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_field(std::string_view f, std::size_t line, const char* what) {
  T value{};
  const char* end = f.data() + f.size();
  auto res = std::from_chars(f.data(), end, value);
  if (f.empty() || res.ec != std::errc() || res.ptr != end) {
    throw ParseError(line, std::string("malformed ") + what + " '" + std::string(f) + "'");
  }
  return value;
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// One-hot: "timestamp,item". Pair: "timestamp,i,j". Dense: "timestamp,v0,...,v{N-1}".
inline Trace load_trace_csv(const std::string& path, RoundKind kind, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file '" + path + "'");
  Trace tr;
  tr.n = n;
  tr.kind = kind;
  std::string raw;
  std::size_t line = 0;
  long long last_ts = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    const auto fields = detail::split_csv(raw);
    const std::size_t want = kind == RoundKind::OneHot ? 2 : kind == RoundKind::Pair ? 3 : n + 1;
    if (fields.size() != want) {
      throw ParseError(line, "expected " + std::to_string(want) + " fields, found " +
                                 std::to_string(fields.size()));
    }
    const auto ts = detail::parse_field<long long>(fields[0], line, "timestamp");
    if (!tr.timestamps.empty() && ts < last_ts) throw ParseError(line, "timestamps decrease");
    last_ts = ts;
    tr.timestamps.push_back(ts);
    auto item = [&](std::string_view f) {
      const auto v = detail::parse_field<long long>(f, line, "item id");
      if (v < 0 || static_cast<std::size_t>(v) >= n) {
        throw RangeError(line, "item " + std::to_string(v) + " outside [0, " + std::to_string(n) + ")");
      }
      return static_cast<std::size_t>(v);
    };
    switch (kind) {
      case RoundKind::OneHot:
        tr.items.push_back(item(fields[1]));
        break;
      case RoundKind::Pair: {
        const std::size_t i = item(fields[1]);
        const std::size_t j = item(fields[2]);
        if (i == j) throw ParseError(line, "pair endpoints must differ");
        tr.pairs.emplace_back(i, j);
        break;
      }
      case RoundKind::Dense: {
        std::vector<double> row(n);
        for (std::size_t j = 0; j < n; ++j) {
          row[j] = detail::parse_field<double>(fields[j + 1], line, "reward");
          if (!(row[j] >= 0.0 && row[j] <= 1.0)) {
            throw RangeError(line, "reward " + std::string(fields[j + 1]) + " outside [0,1]");
          }
        }
        tr.dense.push_back(std::move(row));
        break;
      }
    }
  }
  return tr;
}

inline void save_trace_csv(const std::string& path, const Trace& tr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write trace file '" + path + "'");
  for (std::size_t t = 0; t < tr.rounds(); ++t) {
    out << tr.timestamps[t];
    switch (tr.kind) {
      case RoundKind::OneHot:
        out << ',' << tr.items[t];
        break;
      case RoundKind::Pair:
        out << ',' << tr.pairs[t].first << ',' << tr.pairs[t].second;
        break;
      case RoundKind::Dense:
        for (double v : tr.dense[t]) out << ',' << detail::format_double(v);
        break;
    }
    out << '\n';
  }
}

}  // namespace kexperts
