// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bexdep/matrix.hpp"
#include "bexdep/simulate.hpp"

namespace bexdep {

/// Discretized curves on a common grid with quadrature weights for the
/// L2[0,1] inner product.
struct CurveSet {
  std::vector<double> grid;     // m points, strictly increasing in [0,1]
  Matrix curves;                // n x m values
  std::vector<double> weights;  // positive, trapezoid by default
};

/// Builds a CurveSet with trapezoid weights and validates the grid.
inline CurveSet make_curveset(std::vector<double> grid, Matrix curves) {
  const std::size_t m = grid.size();
  if (m < 2) throw std::invalid_argument("grid too small");
  if (curves.cols != m) throw std::invalid_argument("grid mismatch");
  if (!(grid.front() >= 0.0) || !(grid.back() <= 1.0)) {
    throw std::invalid_argument("grid out of range");
  }
  for (std::size_t j = 1; j < m; ++j) {
    if (!(grid[j] > grid[j - 1])) throw std::invalid_argument("grid not increasing");
  }
  std::vector<double> w(m);
  w[0] = (grid[1] - grid[0]) / 2.0;
  for (std::size_t j = 1; j + 1 < m; ++j) w[j] = (grid[j + 1] - grid[j - 1]) / 2.0;
  w[m - 1] = (grid[m - 1] - grid[m - 2]) / 2.0;
  return {std::move(grid), std::move(curves), std::move(w)};
}

/// Fitted expansion: mean, nonincreasing singular values lambda_j, and
/// eigenfunctions phi_j orthonormal under the quadrature inner product, so
/// a curve decomposes as mean + sum_j z_j lambda_j phi_j with standardized
/// scores z.
struct KLModel {
  std::vector<double> grid;
  std::vector<double> weights;
  std::vector<double> mean;
  std::vector<double> lambdas;  // singular values, nonincreasing
  Matrix eigenfunctions;        // k x m, row j = phi_{j+1}
  double total_variance = 0.0;  // weighted trace of the sample covariance

  int k() const { return static_cast<int>(lambdas.size()); }
  double energy_fraction() const {
    if (total_variance <= 0.0) return 0.0;
    double e = 0.0;
    for (double l : lambdas) e += l * l;
    return e / total_variance;
  }
};

namespace detail {

struct KlEigen {
  Eigen::VectorXd values;   // covariance eigenvalues, descending
  Eigen::MatrixXd vectors;  // columns, same order (in the sqrt(w) geometry)
  Eigen::VectorXd mean;
  double trace = 0.0;
  int rank = 0;
};

inline KlEigen kl_eigen(const CurveSet& cs) {
  const std::size_t n = cs.curves.rows;
  const std::size_t m = cs.grid.size();
  if (n < 2) throw std::invalid_argument("insufficient sample");

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> x(cs.curves.data.data(), static_cast<Eigen::Index>(n),
                             static_cast<Eigen::Index>(m));
  KlEigen out;
  out.mean = x.colwise().mean();

  Eigen::VectorXd sqrt_w(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) sqrt_w[static_cast<Eigen::Index>(j)] = std::sqrt(cs.weights[j]);

  // B = W^{1/2} C W^{1/2} with C the 1/n sample covariance; eigenvectors of B
  // pull back to phi = psi / sqrt(w), orthonormal under <.,.>_w.
  RowMat centered = x.rowwise() - out.mean.transpose();
  centered = centered.array().rowwise() * sqrt_w.transpose().array();
  const Eigen::MatrixXd b =
      centered.transpose() * centered / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");

  out.trace = b.trace();
  const Eigen::Index mm = static_cast<Eigen::Index>(m);
  out.values.resize(mm);
  out.vectors.resize(mm, mm);
  for (Eigen::Index j = 0; j < mm; ++j) {  // flip to descending
    out.values[j] = solver.eigenvalues()[mm - 1 - j];
    out.vectors.col(j) = solver.eigenvectors().col(mm - 1 - j);
  }
  const double top = out.values.size() > 0 ? out.values[0] : 0.0;
  const double floor = top * 1e-12;
  for (Eigen::Index j = 0; j < mm; ++j) {
    if (out.values[j] > floor && out.values[j] > 0.0) ++out.rank;
  }
  return out;
}

}  // namespace detail

/// Fits the expansion from the sample: mean, top-k eigenpairs of the
/// weighted 1/n covariance. lambda_j is the square root of the j-th
/// covariance eigenvalue, so in-sample scores come out with variance
/// exactly 1. Eigenfunction signs are canonicalized by making the
/// largest-magnitude entry positive.
inline KLModel kl_fit(const CurveSet& cs, int k) {
  if (k < 1) throw std::invalid_argument("truncation must be positive");
  const std::size_t n = cs.curves.rows;
  if (n < static_cast<std::size_t>(k) + 1) throw std::invalid_argument("insufficient sample");

  const auto eig = detail::kl_eigen(cs);
  if (eig.rank == 0) {
    throw std::invalid_argument("zero variance: attainable rank is 0");
  }
  if (k > eig.rank) {
    throw std::invalid_argument("rank deficiency: attainable rank is " +
                                std::to_string(eig.rank));
  }

  const std::size_t m = cs.grid.size();
  KLModel model;
  model.grid = cs.grid;
  model.weights = cs.weights;
  model.mean.assign(eig.mean.data(), eig.mean.data() + m);
  model.total_variance = eig.trace;
  model.lambdas.resize(static_cast<std::size_t>(k));
  model.eigenfunctions = Matrix(static_cast<std::size_t>(k), m);
  for (int j = 0; j < k; ++j) {
    model.lambdas[static_cast<std::size_t>(j)] = std::sqrt(eig.values[j]);
    // phi = psi / sqrt(w)
    std::size_t arg = 0;
    double best = -1.0;
    std::vector<double> phi(m);
    for (std::size_t t = 0; t < m; ++t) {
      phi[t] = eig.vectors(static_cast<Eigen::Index>(t), j) / std::sqrt(cs.weights[t]);
      if (std::abs(phi[t]) > best) {
        best = std::abs(phi[t]);
        arg = t;
      }
    }
    const double sign = phi[arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t t = 0; t < m; ++t) {
      model.eigenfunctions(static_cast<std::size_t>(j), t) = sign * phi[t];
    }
  }
  return model;
}

/// Smallest truncation capturing at least `energy` of the total weighted
/// variance (energy measured in covariance eigenvalues, i.e. lambda^2).
inline int suggest_truncation(const CurveSet& cs, double energy) {
  if (!(energy > 0.0) || energy > 1.0) throw std::invalid_argument("energy fraction out of range");
  const auto eig = detail::kl_eigen(cs);
  if (eig.rank == 0) throw std::invalid_argument("zero variance: attainable rank is 0");
  double cum = 0.0;
  for (int j = 0; j < eig.rank; ++j) {
    cum += eig.values[j];
    if (cum >= energy * eig.trace) return j + 1;
  }
  return eig.rank;
}

/// Standardized scores Z_ij = <X_i - mean, phi_j>_w / lambda_j.
inline Matrix kl_scores(const CurveSet& cs, const KLModel& model) {
  if (cs.grid != model.grid) throw std::invalid_argument("grid mismatch");
  const std::size_t n = cs.curves.rows;
  const std::size_t m = cs.grid.size();
  const std::size_t k = model.lambdas.size();
  Matrix z(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = cs.curves.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      const auto phi = model.eigenfunctions.row(j);
      for (std::size_t t = 0; t < m; ++t) {
        acc += (row[t] - model.mean[t]) * phi[t] * model.weights[t];
      }
      z(i, j) = acc / model.lambdas[j];
    }
  }
  return z;
}

/// Linear reconstruction mean + sum_j Z_j lambda_j phi_j.
inline CurveSet kl_reconstruct(const KLModel& model, const Matrix& scores) {
  if (scores.cols != model.lambdas.size()) throw std::invalid_argument("score width mismatch");
  const std::size_t n = scores.rows;
  const std::size_t m = model.grid.size();
  const std::size_t k = model.lambdas.size();
  Matrix curves(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    auto out = curves.row(i);
    for (std::size_t t = 0; t < m; ++t) out[t] = model.mean[t];
    for (std::size_t j = 0; j < k; ++j) {
      const double c = scores(i, j) * model.lambdas[j];
      const auto phi = model.eigenfunctions.row(j);
      for (std::size_t t = 0; t < m; ++t) out[t] += c * phi[t];
    }
  }
  CurveSet cs;
  cs.grid = model.grid;
  cs.weights = model.weights;
  cs.curves = std::move(curves);
  return cs;
}

/// Weighted squared reconstruction error ||X - X_k||_w^2 summed over curves.
inline double reconstruction_error(const CurveSet& original, const CurveSet& reconstructed) {
  if (original.grid != reconstructed.grid) throw std::invalid_argument("grid mismatch");
  if (original.curves.rows != reconstructed.curves.rows) {
    throw std::invalid_argument("dimension mismatch");
  }
  double err = 0.0;
  for (std::size_t i = 0; i < original.curves.rows; ++i) {
    for (std::size_t t = 0; t < original.grid.size(); ++t) {
      const double d = original.curves(i, t) - reconstructed.curves(i, t);
      err += original.weights[t] * d * d;
    }
  }
  return err;
}

/// Result of a test run on KL scores: the truncations used plus the inner
/// engine report.
struct FunctionalTestResult {
  int k_x = 0;
  std::optional<int> k_y;
  std::vector<double> lambdas_x;
  std::vector<double> lambdas_y;
  std::variant<MultiFitReport, BeretReport> report;

  bool rejected() const {
    return std::holds_alternative<MultiFitReport>(report)
               ? std::get<MultiFitReport>(report).rejected
               : std::get<BeretReport>(report).rejected;
  }
  double global_p() const {
    return std::holds_alternative<MultiFitReport>(report)
               ? std::get<MultiFitReport>(report).global_p
               : std::get<BeretReport>(report).global_p;
  }
};

namespace detail {

inline std::variant<MultiFitReport, BeretReport> run_inner_test(
    const MethodConfig& mc, const Matrix& x, const Matrix& y, double alpha,
    std::uint64_t seed) {
  if (mc.kind == MethodKind::multifit) {
    MultiFitOptions opt = mc.multifit;
    opt.alpha = alpha;
    return multifit_test(x, y, opt);
  }
  BeretOptions opt = mc.beret;
  if (mc.kind == MethodKind::bet) {
    if (x.cols != 1 || y.cols != 1) throw std::invalid_argument("bet requires univariate margins");
    opt.m = 1;
  }
  opt.alpha = alpha;
  opt.seed = seed;
  return beret_test(x, y, opt);
}

}  // namespace detail

/// Fits the expansion on the curves, extracts standardized scores, and runs
/// the configured finite-dimensional test on them.
inline FunctionalTestResult functional_independence_test(const CurveSet& cx, const Matrix& y,
                                                         int k, const MethodConfig& mc,
                                                         double alpha, std::uint64_t seed = 0) {
  const KLModel model = kl_fit(cx, k);
  const Matrix scores = kl_scores(cx, model);
  FunctionalTestResult out;
  out.k_x = k;
  out.lambdas_x = model.lambdas;
  out.report = detail::run_inner_test(mc, scores, y, alpha, seed);
  return out;
}

inline FunctionalTestResult functional_independence_test(const CurveSet& cx, const CurveSet& cy,
                                                         int k_x, int k_y, const MethodConfig& mc,
                                                         double alpha, std::uint64_t seed = 0) {
  const KLModel mx = kl_fit(cx, k_x);
  const KLModel my = kl_fit(cy, k_y);
  const Matrix zx = kl_scores(cx, mx);
  const Matrix zy = kl_scores(cy, my);
  FunctionalTestResult out;
  out.k_x = k_x;
  out.k_y = k_y;
  out.lambdas_x = mx.lambdas;
  out.lambdas_y = my.lambdas;
  out.report = detail::run_inner_test(mc, zx, zy, alpha, seed);
  return out;
}

}  // namespace bexdep
