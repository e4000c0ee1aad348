// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bexdep/symmetry.hpp"

namespace bexdep {

/// 2x2 contingency table, row 1 = (a, b), row 2 = (c, d).
struct Table2x2 {
  std::uint64_t a = 0, b = 0, c = 0, d = 0;

  std::uint64_t total() const { return a + b + c + d; }
  bool operator==(const Table2x2&) const = default;
};

enum class PMethod { fisher_two_sided, binomial_two_sided };
enum class Correction { bonferroni, holm };

struct PValue {
  double value = 1.0;
  PMethod method = PMethod::fisher_two_sided;
  std::optional<double> adjusted;
};

namespace detail {

// log k! for k up to kLogFactTableSize-1 from one immutable table, built on
// first use; std::lgamma covers anything larger. The table keeps repeated
// Fisher evaluations cheap for totals up to 2^20.
inline constexpr std::size_t kLogFactTableSize = (1u << 20) + 2;

inline double log_factorial(std::uint64_t k) {
  static const std::vector<double> table = [] {
    std::vector<double> t(kLogFactTableSize);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = std::lgamma(static_cast<double>(i) + 1.0);
    }
    return t;
  }();
  if (k < table.size()) return table[k];
  return std::lgamma(static_cast<double>(k) + 1.0);
}

inline double log_choose(std::uint64_t n, std::uint64_t k) {
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// Running log-sum-exp accumulator.
struct LogSum {
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;

  void add(double logv) {
    if (logv <= max) {
      sum += std::exp(logv - max);
    } else {
      sum = sum * std::exp(max - logv) + 1.0;
      max = logv;
    }
  }
  double value() const { return sum == 0.0 ? 0.0 : std::exp(max) * sum; }
};

}  // namespace detail

/// Two-sided Fisher exact p-value by the minimum-likelihood rule: the sum of
/// hypergeometric probabilities of every table with the observed margins
/// whose probability is <= the observed one, with 1e-7 relative slack for
/// ties. All terms are formed in log space, so totals up to 10^6 and beyond
/// are fine.
inline PValue fisher_exact_2x2(const Table2x2& t) {
  const std::uint64_t m = t.total();
  if (m < 1) throw std::invalid_argument("empty table");
  const std::uint64_t r1 = t.a + t.b;
  const std::uint64_t c1 = t.a + t.c;
  const std::uint64_t r2 = m - r1;

  const double log_denom = detail::log_choose(m, c1);
  const auto log_prob = [&](std::uint64_t x) {
    return detail::log_choose(r1, x) + detail::log_choose(r2, c1 - x) - log_denom;
  };

  const std::uint64_t lo = r1 + c1 > m ? r1 + c1 - m : 0;
  const std::uint64_t hi = std::min(r1, c1);
  const double threshold = log_prob(t.a) + std::log1p(1e-7);

  detail::LogSum acc;
  for (std::uint64_t x = lo; x <= hi; ++x) {
    const double lp = log_prob(x);
    if (lp <= threshold) acc.add(lp);
  }
  return {std::clamp(acc.value(), 0.0, 1.0), PMethod::fisher_two_sided, std::nullopt};
}

/// Two-sided exact binomial p-value for a symmetry statistic: under
/// independence the interaction signs are fair coins, so with
/// k = (n + |s_sum|)/2 the p-value is min(1, 2 P(Bin(n, 1/2) >= k)).
inline double binomial_two_sided(std::size_t n, std::uint64_t abs_s) {
  if (n < 1) throw std::invalid_argument("insufficient sample");
  if (abs_s > n) throw std::invalid_argument("statistic exceeds sample size");
  const std::uint64_t k = (n + abs_s) / 2;
  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  double tail = 0.0;
  for (std::uint64_t j = n;; --j) {  // ascending magnitude
    tail += std::exp(detail::log_choose(n, j) + log_half_n);
    if (j == k) break;
  }
  return std::min(1.0, 2.0 * tail);
}

inline PValue binomial_symmetry_pvalue(const SymmetryStat& s) {
  const std::uint64_t abs_s = static_cast<std::uint64_t>(s.s_sum < 0 ? -s.s_sum : s.s_sum);
  return {binomial_two_sided(s.n, abs_s), PMethod::binomial_two_sided, std::nullopt};
}

/// Two-sided binomial p-values for one sample size, precomputed at every
/// reachable |s_sum|. Same summation order as binomial_two_sided, so the
/// two routes agree bit for bit.
class BinomialTailTable {
 public:
  explicit BinomialTailTable(std::size_t n) : n_(n) {
    if (n < 1) throw std::invalid_argument("insufficient sample");
    const double log_half_n = -static_cast<double>(n) * std::log(2.0);
    tails_.resize(n + 1);
    double tail = 0.0;
    for (std::uint64_t j = n;; --j) {
      tail += std::exp(detail::log_choose(n, j) + log_half_n);
      tails_[j] = tail;
      if (j == 0) break;
    }
  }

  double pvalue(std::int64_t s_sum) const {
    const std::uint64_t abs_s = static_cast<std::uint64_t>(s_sum < 0 ? -s_sum : s_sum);
    if (abs_s > n_) throw std::invalid_argument("statistic exceeds sample size");
    return std::min(1.0, 2.0 * tails_[(n_ + abs_s) / 2]);
  }

 private:
  std::size_t n_;
  std::vector<double> tails_;
};

/// Multiplicity adjustment over `total_tests` tests, of which the given
/// p-values are the computed subset (skipped tests stay in the denominator).
/// Output order matches input order.
inline std::vector<PValue> adjust_pvalues(std::span<const PValue> ps, Correction method,
                                          std::size_t total_tests) {
  if (total_tests < ps.size()) {
    throw std::invalid_argument("total_tests smaller than p-value count");
  }
  std::vector<PValue> out(ps.begin(), ps.end());
  if (method == Correction::bonferroni) {
    for (auto& p : out) {
      p.adjusted = std::min(1.0, p.value * static_cast<double>(total_tests));
    }
    return out;
  }
  // Holm step-down, with the first denominator at total_tests.
  std::vector<std::size_t> order(out.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return out[i].value < out[j].value;
  });
  double running = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const double mult = static_cast<double>(total_tests - rank);
    running = std::max(running, std::min(1.0, mult * out[order[rank]].value));
    out[order[rank]].adjusted = running;
  }
  return out;
}

}  // namespace bexdep
