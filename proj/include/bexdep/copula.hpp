// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace bexdep {

/// One margin after the rank transform: n distinct values in (-1, 1).
struct CopulaSample {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Empirical copula transform: value_i = 2*rank_i/(n+1) - 1 with ranks
/// 1..n. Ties keep first-occurrence order, so the result is deterministic
/// for any input. The (n+1) denominator keeps every value strictly inside
/// (-1, 1), away from the dyadic endpoint.
inline CopulaSample rank_to_copula(std::span<const double> raw) {
  const std::size_t n = raw.size();
  if (n < 2) throw std::invalid_argument("insufficient sample");
  for (double v : raw) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite value");
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t i, std::uint32_t j) { return raw[i] < raw[j]; });
  CopulaSample out;
  out.values.resize(n);
  const double den = static_cast<double>(n) + 1.0;
  for (std::size_t r = 0; r < n; ++r) {
    out.values[order[r]] = 2.0 * static_cast<double>(r + 1) / den - 1.0;
  }
  return out;
}

inline CopulaSample rank_to_copula(const std::vector<double>& raw) {
  return rank_to_copula(std::span<const double>(raw.data(), raw.size()));
}

namespace detail {

// One step of the expansion of c in (0, 1]: emits the digit and advances c.
// 2c - b is exact in binary floating point, so the digit sequence is a pure
// function of the input bits of c.
inline int take_digit(double& c) {
  const int b = c > 0.5 ? 1 : 0;
  c = 2.0 * c - static_cast<double>(b);
  return b;
}

}  // namespace detail

/// First `depth` digits of the binary expansion of u in (-1, 1], as signs.
/// Dyadic rationals follow the left-open convention: their expansion ends
/// in repeating 1s, so the digit stream is total on the interval.
inline std::vector<int> binary_bits(double u, int depth) {
  if (depth < 1) throw std::invalid_argument("depth must be positive");
  if (!(u > -1.0) || !(u <= 1.0)) throw std::invalid_argument("copula value out of range");
  std::vector<int> bits(static_cast<std::size_t>(depth));
  double c = (u + 1.0) / 2.0;  // in (0, 1]
  for (int d = 0; d < depth; ++d) bits[d] = 2 * detail::take_digit(c) - 1;
  return bits;
}

/// Sign bits of the first D binary digits of each observation, packed one
/// 64-bit-word column per depth (bit set <=> digit +1). Interactions reduce
/// to XOR/popcount over columns.
class BitMatrix {
 public:
  BitMatrix() = default;

  BitMatrix(const CopulaSample& s, int depth)
      : n_(s.size()), depth_(depth), wpc_((n_ + 63) / 64) {
    if (depth < 1 || depth > 32) throw std::invalid_argument("depth out of range");
    words_.assign(wpc_ * static_cast<std::size_t>(depth), 0);
    for (std::size_t i = 0; i < n_; ++i) {
      const double u = s.values[i];
      if (!(u > -1.0) || !(u <= 1.0)) throw std::invalid_argument("copula value out of range");
      double c = (u + 1.0) / 2.0;
      for (int d = 0; d < depth; ++d) {
        if (detail::take_digit(c)) {
          words_[static_cast<std::size_t>(d) * wpc_ + i / 64] |= 1ULL << (i % 64);
        }
      }
    }
  }

  std::size_t rows() const { return n_; }
  int depth() const { return depth_; }
  std::size_t words_per_column() const { return wpc_; }

  /// Mask of the valid bits in the last word of a column.
  std::uint64_t tail_mask() const {
    const unsigned r = n_ % 64;
    return r == 0 ? ~0ULL : (1ULL << r) - 1;
  }

  /// Column for depth d (1-based).
  std::span<const std::uint64_t> column(int d) const {
    check_depth(d);
    return {words_.data() + static_cast<std::size_t>(d - 1) * wpc_, wpc_};
  }

  /// Sign (+1/-1) of digit d (1-based) for observation i.
  int sign(std::size_t i, int d) const {
    check_depth(d);
    const std::uint64_t w = words_[static_cast<std::size_t>(d - 1) * wpc_ + i / 64];
    return (w >> (i % 64)) & 1 ? 1 : -1;
  }

 private:
  void check_depth(int d) const {
    if (d < 1 || d > depth_) throw std::invalid_argument("depth overflow");
  }

  std::size_t n_ = 0;
  int depth_ = 0;
  std::size_t wpc_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace bexdep
