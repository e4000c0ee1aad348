// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bexdep/copula.hpp"

namespace bexdep {

/// Interaction index: bit (d-1) of a mask selects depth d of that margin.
/// Both masks nonzero makes a cross interaction, the kind that carries
/// dependence information. Both masks zero is the constant interaction.
struct LambdaIndex {
  std::uint32_t x_mask = 0;
  std::uint32_t y_mask = 0;

  bool is_zero() const { return x_mask == 0 && y_mask == 0; }
  bool is_cross() const { return x_mask != 0 && y_mask != 0; }
  bool operator==(const LambdaIndex&) const = default;
};

/// Mask rendered as one character per depth, depth 1 first.
inline std::string mask_to_string(std::uint32_t mask, int depth) {
  std::string s;
  s.reserve(static_cast<std::size_t>(depth));
  for (int d = 0; d < depth; ++d) s.push_back((mask >> d) & 1 ? '1' : '0');
  return s;
}

/// Sample symmetry statistic of one interaction: s_bar in [-1, 1] and the
/// unnormalized integer sum s_sum = n * s_bar.
struct SymmetryStat {
  LambdaIndex lambda;
  std::int64_t s_sum = 0;
  double s_bar = 0.0;
  std::size_t n = 0;
};

namespace detail {

inline void check_masks(const BitMatrix& x, const BitMatrix& y, LambdaIndex lam) {
  if ((lam.x_mask >> x.depth()) != 0 || (lam.y_mask >> y.depth()) != 0) {
    throw std::invalid_argument("depth overflow");
  }
}

}  // namespace detail

/// Packed interaction column: bit i set <=> A_{lambda,i} = +1. `out` must
/// hold words_per_column() words; bits past n are zeroed.
inline void interaction_column(const BitMatrix& x, const BitMatrix& y, LambdaIndex lam,
                               std::span<std::uint64_t> out) {
  detail::check_masks(x, y, lam);
  if (x.rows() != y.rows()) throw std::invalid_argument("dimension mismatch");
  const std::size_t wpc = x.words_per_column();
  if (out.size() < wpc) throw std::invalid_argument("output buffer too small");

  // With digits encoded as e in {0,1} (1 <=> +1), the product over k selected
  // columns is +1 iff sum(e) == k (mod 2): XOR the columns, complement when k
  // is even.
  const int selected = std::popcount(lam.x_mask) + std::popcount(lam.y_mask);
  for (std::size_t w = 0; w < wpc; ++w) out[w] = 0;
  for (int d = 1; d <= x.depth(); ++d) {
    if ((lam.x_mask >> (d - 1)) & 1) {
      auto col = x.column(d);
      for (std::size_t w = 0; w < wpc; ++w) out[w] ^= col[w];
    }
  }
  for (int d = 1; d <= y.depth(); ++d) {
    if ((lam.y_mask >> (d - 1)) & 1) {
      auto col = y.column(d);
      for (std::size_t w = 0; w < wpc; ++w) out[w] ^= col[w];
    }
  }
  if (selected % 2 == 0) {
    for (std::size_t w = 0; w < wpc; ++w) out[w] = ~out[w];
  }
  if (wpc > 0) out[wpc - 1] &= x.tail_mask();
}

/// Unnormalized sum S_lambda = sum_i A_{lambda,i}.
inline std::int64_t interaction_sum(const BitMatrix& x, const BitMatrix& y, LambdaIndex lam) {
  detail::check_masks(x, y, lam);
  if (x.rows() != y.rows()) throw std::invalid_argument("dimension mismatch");
  const std::size_t wpc = x.words_per_column();
  const std::uint64_t tail = x.tail_mask();

  int selected = std::popcount(lam.x_mask) + std::popcount(lam.y_mask);
  std::int64_t plus = 0;
  for (std::size_t w = 0; w < wpc; ++w) {
    std::uint64_t acc = 0;
    for (int d = 1; d <= x.depth(); ++d) {
      if ((lam.x_mask >> (d - 1)) & 1) acc ^= x.column(d)[w];
    }
    for (int d = 1; d <= y.depth(); ++d) {
      if ((lam.y_mask >> (d - 1)) & 1) acc ^= y.column(d)[w];
    }
    if (selected % 2 == 0) acc = ~acc;
    if (w == wpc - 1) acc &= tail;
    plus += std::popcount(acc);
  }
  return 2 * plus - static_cast<std::int64_t>(x.rows());
}

/// Product of the selected digits of observation i; the empty product is +1.
inline int interaction_value(const BitMatrix& x, const BitMatrix& y, std::size_t i,
                             LambdaIndex lam) {
  detail::check_masks(x, y, lam);
  int v = 1;
  for (int d = 1; d <= x.depth(); ++d) {
    if ((lam.x_mask >> (d - 1)) & 1) v *= x.sign(i, d);
  }
  for (int d = 1; d <= y.depth(); ++d) {
    if ((lam.y_mask >> (d - 1)) & 1) v *= y.sign(i, d);
  }
  return v;
}

inline SymmetryStat symmetry_statistic(const BitMatrix& x, const BitMatrix& y,
                                       LambdaIndex lam) {
  if (x.rows() != y.rows()) throw std::invalid_argument("dimension mismatch");
  const std::int64_t s = interaction_sum(x, y, lam);
  return {lam, s, static_cast<double>(s) / static_cast<double>(x.rows()), x.rows()};
}

/// All (2^d1 - 1)(2^d2 - 1) cross interactions, x_mask-major ascending.
inline std::vector<LambdaIndex> all_cross_interactions(int d1, int d2) {
  if (d1 < 1 || d2 < 1 || d1 > 32 || d2 > 32) throw std::invalid_argument("depth out of range");
  std::vector<LambdaIndex> out;
  const std::uint64_t nx = (1ULL << d1) - 1, ny = (1ULL << d2) - 1;
  out.reserve(nx * ny);
  for (std::uint32_t xm = 1; xm <= nx; ++xm) {
    for (std::uint32_t ym = 1; ym <= ny; ++ym) out.push_back({xm, ym});
  }
  return out;
}

}  // namespace bexdep
