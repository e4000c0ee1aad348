// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "bexdep/copula.hpp"
#include "bexdep/exact.hpp"
#include "bexdep/matrix.hpp"
#include "bexdep/parallel.hpp"
#include "bexdep/symmetry.hpp"

namespace bexdep {

/// Dyadic rectangle on one margin pair: depths (k1, k2) and the prefix
/// digits selecting it. Prefix bit t (0-based) set <=> depth t+1 digit +1.
/// Margin indices are 0-based; reports render them 1-based.
struct Cuboid {
  std::uint32_t x_margin = 0;
  std::uint32_t y_margin = 0;
  std::uint32_t depth_x = 0;  // k1
  std::uint32_t depth_y = 0;  // k2
  std::uint32_t prefix_x = 0;
  std::uint32_t prefix_y = 0;

  std::uint32_t resolution() const { return depth_x + depth_y; }
  bool operator==(const Cuboid&) const = default;
};

/// Number of cuboids per margin pair up to resolution r_max:
/// sum_{r=0}^{r_max} (r+1) 2^r.
inline std::uint64_t cuboids_per_pair(int r_max) {
  if (r_max < 0) throw std::invalid_argument("r_max must be nonnegative");
  if (r_max > 20) throw std::invalid_argument("r_max out of range");
  std::uint64_t total = 0;
  for (int r = 0; r <= r_max; ++r) {
    total += static_cast<std::uint64_t>(r + 1) << r;
  }
  return total;
}

/// Every cuboid for every margin pair, pair-major and resolution-ascending.
/// Within a resolution, depth pairs go (0,r)..(r,0) and prefixes count up
/// with depth-1 in the low bit.
inline std::vector<Cuboid> enumerate_cuboids(std::size_t p, std::size_t q, int r_max) {
  if (p < 1 || q < 1) throw std::invalid_argument("dimension mismatch");
  const std::uint64_t per_pair = cuboids_per_pair(r_max);
  std::vector<Cuboid> out;
  out.reserve(per_pair * p * q);
  for (std::uint32_t jx = 0; jx < p; ++jx) {
    for (std::uint32_t jy = 0; jy < q; ++jy) {
      for (int r = 0; r <= r_max; ++r) {
        for (int k1 = 0; k1 <= r; ++k1) {
          const int k2 = r - k1;
          for (std::uint32_t px = 0; px < (1u << k1); ++px) {
            for (std::uint32_t py = 0; py < (1u << k2); ++py) {
              out.push_back({jx, jy, static_cast<std::uint32_t>(k1),
                             static_cast<std::uint32_t>(k2), px, py});
            }
          }
        }
      }
    }
  }
  return out;
}

/// 2x2 table of the observations inside the cuboid, split by digit k1+1 of
/// x (rows: -1 then +1) and digit k2+1 of y (columns: -1 then +1).
inline Table2x2 cuboid_table(const BitMatrix& xb, const BitMatrix& yb, const Cuboid& c) {
  const int need_x = static_cast<int>(c.depth_x) + 1;
  const int need_y = static_cast<int>(c.depth_y) + 1;
  if (need_x > xb.depth() || need_y > yb.depth()) throw std::invalid_argument("depth overflow");
  if (xb.rows() != yb.rows()) throw std::invalid_argument("dimension mismatch");

  const std::size_t wpc = xb.words_per_column();
  const auto xs = xb.column(need_x);
  const auto ys = yb.column(need_y);
  Table2x2 t;
  for (std::size_t w = 0; w < wpc; ++w) {
    std::uint64_t inside = w == wpc - 1 ? xb.tail_mask() : ~0ULL;
    for (std::uint32_t d = 0; d < c.depth_x && inside; ++d) {
      const std::uint64_t col = xb.column(static_cast<int>(d) + 1)[w];
      inside &= (c.prefix_x >> d) & 1 ? col : ~col;
    }
    for (std::uint32_t d = 0; d < c.depth_y && inside; ++d) {
      const std::uint64_t col = yb.column(static_cast<int>(d) + 1)[w];
      inside &= (c.prefix_y >> d) & 1 ? col : ~col;
    }
    if (!inside) continue;
    t.a += std::popcount(inside & ~xs[w] & ~ys[w]);
    t.b += std::popcount(inside & ~xs[w] & ys[w]);
    t.c += std::popcount(inside & xs[w] & ~ys[w]);
    t.d += std::popcount(inside & xs[w] & ys[w]);
  }
  return t;
}

/// Convenience overload from copula samples; builds bits to the needed depth.
inline Table2x2 cuboid_table(const CopulaSample& xc, const CopulaSample& yc, const Cuboid& c) {
  const BitMatrix xb(xc, static_cast<int>(c.depth_x) + 1);
  const BitMatrix yb(yc, static_cast<int>(c.depth_y) + 1);
  return cuboid_table(xb, yb, c);
}

/// Count-path cuboid statistic 2^{k1+k2} D^2 where D = (a+d) - (b+c) of the
/// cuboid table. Exact in integers.
inline std::int64_t cuboid_statistic_from_table(const Table2x2& t, const Cuboid& c) {
  const std::int64_t diff = static_cast<std::int64_t>(t.a + t.d) - static_cast<std::int64_t>(t.b + t.c);
  return (std::int64_t{1} << c.resolution()) * diff * diff;
}

/// Rank-one symmetric weight W = scale * w w^T over the interaction basis
/// at depths (d1, d2). Basis order: index = x_mask * 2^{d2} + y_mask, with
/// the zero interaction at index 0.
struct WeightMatrix {
  int depth_x = 0;
  int depth_y = 0;
  std::vector<double> w;
  double scale = 1.0;

  std::size_t basis_size() const { return std::size_t{1} << (depth_x + depth_y); }
  std::size_t index_of(LambdaIndex lam) const {
    return (static_cast<std::size_t>(lam.x_mask) << depth_y) + lam.y_mask;
  }
};

/// Unnormalized symmetry sums over the same basis as WeightMatrix
/// (S[0] = n for the zero interaction).
inline std::vector<std::int64_t> symmetry_sum_vector(const BitMatrix& x, const BitMatrix& y,
                                                     int d1, int d2) {
  if (d1 < 1 || d2 < 1 || d1 > x.depth() || d2 > y.depth()) {
    throw std::invalid_argument("depth overflow");
  }
  std::vector<std::int64_t> s(std::size_t{1} << (d1 + d2));
  for (std::uint32_t xm = 0; xm < (1u << d1); ++xm) {
    for (std::uint32_t ym = 0; ym < (1u << d2); ++ym) {
      s[(static_cast<std::size_t>(xm) << d2) + ym] = interaction_sum(x, y, {xm, ym});
    }
  }
  return s;
}

/// Weight-path representation of the cuboid statistic. The cuboid indicator
/// factors as prod (1 +- A)/2 over the prefix digits; expanding it against
/// the two splitting digits gives +-1 coefficients on 2^{k1+k2} cross
/// interactions, and S^T W S = 2^{k1+k2} D^2 with scale = 2^{-(k1+k2)}.
inline WeightMatrix cuboid_weight_vector(const Cuboid& c, int d1, int d2) {
  const int need_x = static_cast<int>(c.depth_x) + 1;
  const int need_y = static_cast<int>(c.depth_y) + 1;
  if (need_x > d1 || need_y > d2) throw std::invalid_argument("depth overflow");

  WeightMatrix wm;
  wm.depth_x = d1;
  wm.depth_y = d2;
  wm.w.assign(std::size_t{1} << (d1 + d2), 0.0);
  wm.scale = std::ldexp(1.0, -static_cast<int>(c.resolution()));

  for (std::uint32_t tx = 0; tx < (1u << c.depth_x); ++tx) {
    // product of the selected x prefix signs
    const int neg_x = std::popcount(tx & ~c.prefix_x);
    const std::uint32_t x_mask = tx | (1u << c.depth_x);
    for (std::uint32_t ty = 0; ty < (1u << c.depth_y); ++ty) {
      const int neg_y = std::popcount(ty & ~c.prefix_y);
      const std::uint32_t y_mask = ty | (1u << c.depth_y);
      const double coeff = (neg_x + neg_y) % 2 == 0 ? 1.0 : -1.0;
      wm.w[wm.index_of({x_mask, y_mask})] = coeff;
    }
  }
  return wm;
}

/// S^T W S = scale * (w . S)^2.
inline double quadratic_form(const WeightMatrix& wm, std::span<const double> s) {
  if (s.size() != wm.basis_size()) throw std::invalid_argument("basis mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) dot += wm.w[i] * s[i];
  return wm.scale * dot * dot;
}

inline double quadratic_form(const WeightMatrix& wm, std::span<const std::int64_t> s) {
  if (s.size() != wm.basis_size()) throw std::invalid_argument("basis mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) dot += wm.w[i] * static_cast<double>(s[i]);
  return wm.scale * dot * dot;
}

/// Maximum of the quadratic forms and the index attaining it; ties go to
/// the lowest index.
template <class T>
std::pair<double, std::size_t> max_quadratic_statistic(std::span<const T> s,
                                                       std::span<const WeightMatrix> weights) {
  if (weights.empty()) throw std::invalid_argument("no weights");
  double best = -std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double v = quadratic_form(weights[j], s);
    if (v > best) {
      best = v;
      arg = j;
    }
  }
  return {best, arg};
}

/// Power diagnostic for one weight: for rank-one W the top eigenvector is
/// w/|w| with eigenvalue scale*|w|^2, and power tracks how well the mean
/// symmetry vector under the alternative aligns with it.
struct FavorabilityDiagnostic {
  std::vector<double> mu;
  double top_eigenvalue = 0.0;
  double alignment = 0.0;
  bool degenerate = false;
};

inline FavorabilityDiagnostic analyze_weight_favorability(const WeightMatrix& wm,
                                                          std::span<const double> mu) {
  if (mu.size() != wm.basis_size()) throw std::invalid_argument("basis mismatch");
  FavorabilityDiagnostic diag;
  diag.mu.assign(mu.begin(), mu.end());
  double w2 = 0.0, m2 = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    w2 += wm.w[i] * wm.w[i];
    m2 += mu[i] * mu[i];
    dot += wm.w[i] * mu[i];
  }
  diag.top_eigenvalue = wm.scale * w2;
  if (m2 == 0.0 || w2 == 0.0) {
    diag.degenerate = true;
    diag.alignment = 0.0;
  } else {
    diag.alignment = dot / std::sqrt(w2 * m2);
  }
  return diag;
}

enum class MultiFitMode { exhaustive, adaptive };

struct MultiFitOptions {
  int r_max = 4;
  double alpha = 0.05;
  MultiFitMode mode = MultiFitMode::exhaustive;
  std::uint64_t min_count = 16;   // cuboids with fewer observations inside are
                                  // enumerated but not tested
  double p_expand = 0.1;          // adaptive: expand children of cuboids with
                                  // unadjusted p at or below this
  Correction correction = Correction::bonferroni;
  unsigned threads = 1;
  bool keep_tests = true;
};

struct CuboidResult {
  Cuboid cuboid;
  Table2x2 table;
  PValue p;
};

struct MultiFitReport {
  double global_p = 1.0;
  double alpha = 0.05;
  MultiFitMode mode = MultiFitMode::exhaustive;
  std::uint64_t total_tests = 0;      // Bonferroni denominator g (full enumeration)
  std::uint64_t performed_tests = 0;  // cuboids that met the count floor
  bool rejected = false;
  std::optional<CuboidResult> strongest;
  std::vector<CuboidResult> tests;
};

namespace detail {

inline std::uint64_t cuboid_key(const Cuboid& c) {
  return (static_cast<std::uint64_t>(c.depth_x) << 58) |
         (static_cast<std::uint64_t>(c.depth_y) << 52) |
         (static_cast<std::uint64_t>(c.prefix_x) << 26) | c.prefix_y;
}

inline void finalize_report(MultiFitReport& rep, std::vector<CuboidResult>&& results,
                            const MultiFitOptions& opt) {
  rep.performed_tests = results.size();
  std::vector<PValue> raw;
  raw.reserve(results.size());
  for (const auto& r : results) raw.push_back(r.p);
  const auto adjusted = adjust_pvalues(raw, opt.correction, rep.total_tests);
  for (std::size_t i = 0; i < results.size(); ++i) results[i].p = adjusted[i];

  std::size_t best = results.size();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (best == results.size() || *results[i].p.adjusted < *results[best].p.adjusted) {
      best = i;
    }
  }
  if (best < results.size()) {
    rep.global_p = std::min(1.0, *results[best].p.adjusted);
    rep.strongest = results[best];
  } else {
    rep.global_p = 1.0;
  }
  rep.rejected = rep.global_p <= rep.alpha;
  if (opt.keep_tests) rep.tests = std::move(results);
}

}  // namespace detail

/// The MultiFIT procedure on two multivariate samples: rank-transform every
/// margin, test the 2x2 split of every enumerated cuboid with Fisher's exact
/// test, and correct over the full enumeration count. Adaptive mode tests
/// resolution 0 and descends only into promising cuboids, but keeps the
/// exhaustive denominator, so it can only lose power, never level.
inline MultiFitReport multifit_test(const Matrix& X, const Matrix& Y,
                                    const MultiFitOptions& opt = {}) {
  if (X.rows != Y.rows) throw std::invalid_argument("dimension mismatch");
  if (X.cols < 1 || Y.cols < 1) throw std::invalid_argument("dimension mismatch");
  if (X.rows < 8) throw std::invalid_argument("n too small");
  if (!(opt.alpha >= 0.0) || opt.alpha >= 1.0) throw std::invalid_argument("invalid alpha");
  const int r_max = opt.r_max;
  if (r_max < 0) throw std::invalid_argument("r_max must be nonnegative");

  const int depth = r_max + 1;
  std::vector<BitMatrix> xbits, ybits;
  xbits.reserve(X.cols);
  ybits.reserve(Y.cols);
  for (std::size_t j = 0; j < X.cols; ++j) {
    xbits.emplace_back(rank_to_copula(X.column(j)), depth);
  }
  for (std::size_t j = 0; j < Y.cols; ++j) {
    ybits.emplace_back(rank_to_copula(Y.column(j)), depth);
  }

  MultiFitReport rep;
  rep.alpha = opt.alpha;
  rep.mode = opt.mode;
  rep.total_tests = cuboids_per_pair(r_max) * X.cols * Y.cols;

  std::vector<CuboidResult> results;
  if (opt.mode == MultiFitMode::exhaustive) {
    const auto cuboids = enumerate_cuboids(X.cols, Y.cols, r_max);
    std::vector<std::optional<CuboidResult>> slots(cuboids.size());
    parallel_for(cuboids.size(), opt.threads, [&](std::size_t i) {
      const Cuboid& c = cuboids[i];
      const Table2x2 t = cuboid_table(xbits[c.x_margin], ybits[c.y_margin], c);
      if (t.total() < opt.min_count) return;
      slots[i] = CuboidResult{c, t, fisher_exact_2x2(t)};
    });
    for (auto& s : slots) {
      if (s) results.push_back(std::move(*s));
    }
  } else {
    // Adaptive refinement per margin pair, breadth-first by resolution.
    for (std::uint32_t jx = 0; jx < X.cols; ++jx) {
      for (std::uint32_t jy = 0; jy < Y.cols; ++jy) {
        std::unordered_set<std::uint64_t> active;
        active.insert(detail::cuboid_key({jx, jy, 0, 0, 0, 0}));
        for (int r = 0; r <= r_max; ++r) {
          std::unordered_set<std::uint64_t> next;
          for (int k1 = 0; k1 <= r; ++k1) {
            const int k2 = r - k1;
            for (std::uint32_t px = 0; px < (1u << k1); ++px) {
              for (std::uint32_t py = 0; py < (1u << k2); ++py) {
                const Cuboid c{jx, jy, static_cast<std::uint32_t>(k1),
                               static_cast<std::uint32_t>(k2), px, py};
                if (!active.contains(detail::cuboid_key(c))) continue;
                const Table2x2 t = cuboid_table(xbits[jx], ybits[jy], c);
                if (t.total() < opt.min_count) continue;
                const PValue p = fisher_exact_2x2(t);
                results.push_back({c, t, p});
                if (p.value <= opt.p_expand && r < r_max) {
                  for (std::uint32_t s = 0; s < 2; ++s) {
                    next.insert(detail::cuboid_key({jx, jy, c.depth_x + 1, c.depth_y,
                                                    c.prefix_x | (s << c.depth_x), c.prefix_y}));
                    next.insert(detail::cuboid_key({jx, jy, c.depth_x, c.depth_y + 1,
                                                    c.prefix_x, c.prefix_y | (s << c.depth_y)}));
                  }
                }
              }
            }
          }
          active = std::move(next);
        }
      }
    }
  }

  detail::finalize_report(rep, std::move(results), opt);
  return rep;
}

}  // namespace bexdep
