// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bexdep/copula.hpp"
#include "bexdep/exact.hpp"
#include "bexdep/matrix.hpp"
#include "bexdep/parallel.hpp"
#include "bexdep/rng.hpp"
#include "bexdep/symmetry.hpp"

namespace bexdep {

/// One random direction pair for X and Y, unit length each.
struct ProjectionPair {
  std::vector<double> s;
  std::vector<double> t;
  std::uint32_t seed_id = 0;
};

namespace detail {

inline std::vector<double> unit_direction(std::size_t dim, RandomStream& rs) {
  std::vector<double> v(dim);
  if (dim == 1) {
    v[0] = 1.0;
    return v;
  }
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rs.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  // canonical sign: first nonzero coordinate positive, so the reported
  // symmetry statistic does not flip with the draw
  for (double x : v) {
    if (x != 0.0) {
      if (x < 0.0) {
        for (auto& y : v) y = -y;
      }
      break;
    }
  }
  return v;
}

}  // namespace detail

/// m direction pairs, uniform on the spheres via normalized normals, each
/// from its own (seed, id)-derived stream. Univariate margins get the fixed
/// direction (1).
inline std::vector<ProjectionPair> sample_projections(std::size_t p, std::size_t q, int m,
                                                      std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("projection count must be positive");
  if (p < 1 || q < 1) throw std::invalid_argument("dimension mismatch");
  std::vector<ProjectionPair> out(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    RandomStream rs(derive_seed(seed, kSeedProjection, static_cast<std::uint64_t>(j)));
    auto& pp = out[static_cast<std::size_t>(j)];
    pp.seed_id = static_cast<std::uint32_t>(j);
    pp.s = detail::unit_direction(p, rs);
    pp.t = detail::unit_direction(q, rs);
  }
  return out;
}

struct BeretFinding {
  std::uint32_t projection = 0;
  LambdaIndex lambda;
  SymmetryStat stat;
  PValue p;
};

struct BeretOptions {
  int m = 30;
  int d_max = 4;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  Correction correction = Correction::bonferroni;
  unsigned threads = 1;
  bool keep_findings = false;
};

struct BeretReport {
  double global_p = 1.0;
  double alpha = 0.05;
  int d_max = 4;
  std::uint64_t total_tests = 0;  // m (2^d_max - 1)^2
  bool rejected = false;
  std::vector<ProjectionPair> projections;
  std::optional<BeretFinding> strongest;
  std::vector<BeretFinding> findings;
};

/// BERET with caller-supplied projections: BET symmetry statistics on every
/// projected pair, exact binomial p-values, multiplicity correction over
/// all projections and cross interactions.
inline BeretReport beret_test_with_projections(const Matrix& X, const Matrix& Y,
                                               std::vector<ProjectionPair> projections,
                                               const BeretOptions& opt = {}) {
  if (X.rows != Y.rows) throw std::invalid_argument("dimension mismatch");
  if (X.cols < 1 || Y.cols < 1) throw std::invalid_argument("dimension mismatch");
  if (X.rows < 8) throw std::invalid_argument("n too small");
  if (opt.d_max < 1 || opt.d_max > 16) throw std::invalid_argument("depth out of range");
  if (!(opt.alpha >= 0.0) || opt.alpha >= 1.0) throw std::invalid_argument("invalid alpha");
  if (projections.empty()) throw std::invalid_argument("projection count must be positive");
  for (const auto& pp : projections) {
    if (pp.s.size() != X.cols || pp.t.size() != Y.cols) {
      throw std::invalid_argument("dimension mismatch");
    }
  }

  const std::size_t n = X.rows;
  const auto lambdas = all_cross_interactions(opt.d_max, opt.d_max);
  const BinomialTailTable tails(n);

  BeretReport rep;
  rep.alpha = opt.alpha;
  rep.d_max = opt.d_max;
  rep.total_tests = projections.size() * lambdas.size();

  std::vector<std::vector<BeretFinding>> per_proj(projections.size());
  parallel_for(projections.size(), opt.threads, [&](std::size_t j) {
    const auto& pp = projections[j];
    std::vector<double> px(n), py(n);
    for (std::size_t i = 0; i < n; ++i) {
      double sx = 0.0, ty = 0.0;
      const auto xr = X.row(i);
      const auto yr = Y.row(i);
      for (std::size_t k = 0; k < X.cols; ++k) sx += pp.s[k] * xr[k];
      for (std::size_t k = 0; k < Y.cols; ++k) ty += pp.t[k] * yr[k];
      px[i] = sx;
      py[i] = ty;
    }
    const BitMatrix xb(rank_to_copula(px), opt.d_max);
    const BitMatrix yb(rank_to_copula(py), opt.d_max);

    auto& local = per_proj[j];
    local.reserve(lambdas.size());
    for (const auto& lam : lambdas) {
      const std::int64_t s_sum = interaction_sum(xb, yb, lam);
      SymmetryStat st{lam, s_sum, static_cast<double>(s_sum) / static_cast<double>(n), n};
      PValue p{tails.pvalue(s_sum), PMethod::binomial_two_sided, std::nullopt};
      local.push_back({static_cast<std::uint32_t>(j), lam, st, p});
    }
  });

  // deterministic reduction in projection-major, lambda-enumeration order
  std::vector<BeretFinding> all;
  all.reserve(rep.total_tests);
  for (auto& v : per_proj) {
    for (auto& f : v) all.push_back(std::move(f));
  }
  std::vector<PValue> raw;
  raw.reserve(all.size());
  for (const auto& f : all) raw.push_back(f.p);
  const auto adjusted = adjust_pvalues(raw, opt.correction, rep.total_tests);
  for (std::size_t i = 0; i < all.size(); ++i) all[i].p = adjusted[i];

  std::size_t best = all.size();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (best == all.size() || *all[i].p.adjusted < *all[best].p.adjusted) best = i;
  }
  if (best < all.size()) {
    rep.global_p = std::min(1.0, *all[best].p.adjusted);
    rep.strongest = all[best];
  }
  rep.rejected = rep.global_p <= rep.alpha;
  rep.projections = std::move(projections);
  if (opt.keep_findings) rep.findings = std::move(all);
  return rep;
}

inline BeretReport beret_test(const Matrix& X, const Matrix& Y, const BeretOptions& opt = {}) {
  return beret_test_with_projections(
      X, Y, sample_projections(X.cols, Y.cols, opt.m, opt.seed), opt);
}

/// Projected points of the strongest finding plus the sign of its
/// interaction per observation (the white/dark region membership).
struct ProjectedPoints {
  std::vector<double> sx;
  std::vector<double> ty;
  std::vector<int> region;
};

inline ProjectedPoints strongest_projection_points(const Matrix& X, const Matrix& Y,
                                                   const BeretReport& rep, int d_max) {
  if (!rep.strongest) throw std::invalid_argument("report has no finding");
  const auto& pp = rep.projections.at(rep.strongest->projection);
  const std::size_t n = X.rows;
  ProjectedPoints out;
  out.sx.resize(n);
  out.ty.resize(n);
  out.region.resize(n);
  std::vector<double> px(n), py(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sx = 0.0, ty = 0.0;
    for (std::size_t k = 0; k < X.cols; ++k) sx += pp.s[k] * X(i, k);
    for (std::size_t k = 0; k < Y.cols; ++k) ty += pp.t[k] * Y(i, k);
    px[i] = out.sx[i] = sx;
    py[i] = out.ty[i] = ty;
  }
  const BitMatrix xb(rank_to_copula(px), d_max);
  const BitMatrix yb(rank_to_copula(py), d_max);
  for (std::size_t i = 0; i < n; ++i) {
    out.region[i] = interaction_value(xb, yb, i, rep.strongest->lambda);
  }
  return out;
}

}  // namespace bexdep
