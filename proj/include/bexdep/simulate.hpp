// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bexdep/beret.hpp"
#include "bexdep/matrix.hpp"
#include "bexdep/multifit.hpp"
#include "bexdep/parallel.hpp"
#include "bexdep/rng.hpp"

namespace bexdep {

enum class Shape { linear, parabolic, circular, sine, checkerboard, local, independent };
enum class Placement { marginal, spread };

inline std::string shape_name(Shape s) {
  switch (s) {
    case Shape::linear: return "linear";
    case Shape::parabolic: return "parabolic";
    case Shape::circular: return "circular";
    case Shape::sine: return "sine";
    case Shape::checkerboard: return "checkerboard";
    case Shape::local: return "local";
    case Shape::independent: return "null";
  }
  return "?";
}

inline Shape parse_shape(const std::string& name) {
  if (name == "linear") return Shape::linear;
  if (name == "parabolic") return Shape::parabolic;
  if (name == "circular") return Shape::circular;
  if (name == "sine") return Shape::sine;
  if (name == "checkerboard") return Shape::checkerboard;
  if (name == "local") return Shape::local;
  if (name == "null" || name == "independent") return Shape::independent;
  throw std::invalid_argument("unknown scenario: " + name);
}

inline std::string placement_name(Placement p) {
  return p == Placement::marginal ? "marginal" : "spread";
}

inline Placement parse_placement(const std::string& name) {
  if (name == "marginal") return Placement::marginal;
  if (name == "spread") return Placement::spread;
  throw std::invalid_argument("unknown placement: " + name);
}

/// Per-shape noise multiplier: sigma(level) = 0.05 * level * noise_scale.
/// Calibrated once at n = 128 with the default test settings so the
/// 20-level grid walks each scenario from high power to low and the
/// ensemble test sits near half power at level 10.
inline double shape_noise_scale(Shape s) {
  switch (s) {
    case Shape::linear: return 1.4;
    case Shape::parabolic: return 0.8;
    case Shape::circular: return 0.5;
    case Shape::sine: return 0.4;
    case Shape::checkerboard: return 0.6;
    case Shape::local: return 0.5;
    case Shape::independent: return 1.0;
  }
  return 1.0;
}

struct ScenarioSpec {
  Shape shape = Shape::independent;
  Placement placement = Placement::marginal;
  std::size_t p = 2;
  std::size_t q = 2;
  std::size_t n = 128;
  int noise_level = 1;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix x;
  Matrix y;
};

namespace detail {

// Draws one signal pair for the shape. Functional shapes carry the noise on
// y; circular and local carry it on both coordinates.
inline void draw_signal(Shape shape, double sigma, RandomStream& rs, double& x, double& y) {
  constexpr double kTwoPi = 6.28318530717958647692;
  switch (shape) {
    case Shape::linear:
      x = rs.uniform(-1.0, 1.0);
      y = x + sigma * rs.normal();
      break;
    case Shape::parabolic:
      x = rs.uniform(-1.0, 1.0);
      y = x * x + sigma * rs.normal();
      break;
    case Shape::circular: {
      const double theta = rs.uniform(0.0, kTwoPi);
      x = std::cos(theta) + sigma * rs.normal();
      y = std::sin(theta) + sigma * rs.normal();
      break;
    }
    case Shape::sine:
      x = rs.uniform(-1.0, 1.0);
      y = std::sin(4.0 * 3.14159265358979323846 * x) + sigma * rs.normal();
      break;
    case Shape::checkerboard: {
      // uniform over the 8 dark cells of the 4x4 alternating pattern
      const std::uint64_t cell = rs.next_u64() % 8;
      const std::uint64_t i = cell / 2;
      const std::uint64_t j = 2 * (cell % 2) + (i % 2);
      x = -1.0 + 0.5 * (static_cast<double>(i) + rs.uniform01());
      y = -1.0 + 0.5 * (static_cast<double>(j) + rs.uniform01()) + sigma * rs.normal();
      break;
    }
    case Shape::local: {
      // dependent blob in the lower-right quadrant cell with probability 1/4
      const bool blob = rs.next_u64() % 4 == 0;
      if (blob) {
        const double g = rs.normal();
        x = 0.5 + 0.2 * g + sigma * rs.normal();
        y = -0.5 + 0.2 * g + sigma * rs.normal();
      } else {
        x = rs.uniform(-1.0, 1.0);
        y = rs.uniform(-1.0, 1.0);
      }
      break;
    }
    case Shape::independent:
      x = rs.uniform(-1.0, 1.0);
      y = rs.uniform(-1.0, 1.0);
      break;
  }
}

}  // namespace detail

/// Orthogonal mix used by the spread placement: symmetric Householder map
/// taking e_1 to (1,...,1)/sqrt(p), so the signal coordinate spreads evenly
/// over all coordinates.
inline Matrix placement_rotation(std::size_t p) {
  Matrix Q(p, p, 0.0);
  for (std::size_t i = 0; i < p; ++i) Q(i, i) = 1.0;
  if (p < 2) return Q;
  const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(p));
  std::vector<double> v(p, -inv_sqrt_p);
  v[0] += 1.0;  // v = e1 - u
  double v2 = 0.0;
  for (double vi : v) v2 += vi * vi;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) Q(i, j) -= 2.0 * v[i] * v[j] / v2;
  }
  return Q;
}

/// Replaces each row r of M by Q r.
inline void apply_rotation(Matrix& m, const Matrix& q) {
  if (q.rows != m.cols || q.cols != m.cols) throw std::invalid_argument("dimension mismatch");
  std::vector<double> tmp(m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto row = m.row(i);
    for (std::size_t a = 0; a < m.cols; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b < m.cols; ++b) acc += q(a, b) * row[b];
      tmp[a] = acc;
    }
    for (std::size_t a = 0; a < m.cols; ++a) row[a] = tmp[a];
  }
}

/// Embeds the signal pair in coordinate 1 of each side with independent
/// standard normal nuisance coordinates, then applies the placement map.
inline Dataset generate_scenario(const ScenarioSpec& spec) {
  if (spec.noise_level < 1 || spec.noise_level > 20) {
    throw std::invalid_argument("noise_level out of range");
  }
  if (spec.p < 2 || spec.q < 2) throw std::invalid_argument("dims too small for placement");
  if (spec.n < 8) throw std::invalid_argument("n too small");

  const double sigma = 0.05 * spec.noise_level * shape_noise_scale(spec.shape);
  RandomStream rs(derive_seed(spec.seed, kSeedScenario,
                              static_cast<std::uint64_t>(spec.shape),
                              static_cast<std::uint64_t>(spec.noise_level)));
  Dataset ds{Matrix(spec.n, spec.p), Matrix(spec.n, spec.q)};
  for (std::size_t i = 0; i < spec.n; ++i) {
    double xs = 0.0, ys = 0.0;
    detail::draw_signal(spec.shape, sigma, rs, xs, ys);
    ds.x(i, 0) = xs;
    ds.y(i, 0) = ys;
    for (std::size_t j = 1; j < spec.p; ++j) ds.x(i, j) = rs.normal();
    for (std::size_t j = 1; j < spec.q; ++j) ds.y(i, j) = rs.normal();
  }
  if (spec.placement == Placement::spread) {
    const Matrix qx = placement_rotation(spec.p);
    const Matrix qy = placement_rotation(spec.q);
    apply_rotation(ds.x, qx);
    apply_rotation(ds.y, qy);
  }
  return ds;
}

/// The hidden 3D circle: a circular dependency between the third
/// coordinates, rotated by pi/4 within the (X3, Y3) plane so neither
/// marginal scatter shows it. All other coordinates are independent noise.
inline Dataset rotated_circle_3d(std::size_t n, double noise_sd, std::uint64_t seed) {
  if (n < 8) throw std::invalid_argument("n too small");
  constexpr double kTwoPi = 6.28318530717958647692;
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  RandomStream rs(derive_seed(seed, kSeedScenario, 0x3d));
  Dataset ds{Matrix(n, 3), Matrix(n, 3)};
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = rs.uniform(0.0, kTwoPi);
    const double x3 = std::cos(theta) + noise_sd * rs.normal();
    const double y3 = std::sin(theta) + noise_sd * rs.normal();
    ds.x(i, 2) = kInvSqrt2 * (x3 - y3);
    ds.y(i, 2) = kInvSqrt2 * (x3 + y3);
    ds.x(i, 0) = rs.normal();
    ds.x(i, 1) = rs.normal();
    ds.y(i, 0) = rs.normal();
    ds.y(i, 1) = rs.normal();
  }
  return ds;
}

enum class MethodKind { multifit, beret, bet };

inline std::string method_name(MethodKind k) {
  switch (k) {
    case MethodKind::multifit: return "multifit";
    case MethodKind::beret: return "beret";
    case MethodKind::bet: return "bet";
  }
  return "?";
}

inline MethodKind parse_method(const std::string& name) {
  if (name == "multifit") return MethodKind::multifit;
  if (name == "beret") return MethodKind::beret;
  if (name == "bet") return MethodKind::bet;
  throw std::invalid_argument("unknown method: " + name);
}

struct MethodConfig {
  MethodKind kind = MethodKind::multifit;
  MultiFitOptions multifit;
  BeretOptions beret;
};

/// Runs one test at level alpha with a replicate-specific seed; returns the
/// rejection decision.
inline bool method_rejects(const MethodConfig& mc, const Matrix& x, const Matrix& y,
                           double alpha, std::uint64_t seed) {
  switch (mc.kind) {
    case MethodKind::multifit: {
      MultiFitOptions opt = mc.multifit;
      opt.alpha = alpha;
      opt.threads = 1;
      opt.keep_tests = false;
      return multifit_test(x, y, opt).rejected;
    }
    case MethodKind::beret:
    case MethodKind::bet: {
      BeretOptions opt = mc.beret;
      if (mc.kind == MethodKind::bet) {
        if (x.cols != 1 || y.cols != 1) {
          throw std::invalid_argument("bet requires univariate margins");
        }
        opt.m = 1;
      }
      opt.alpha = alpha;
      opt.seed = seed;
      opt.threads = 1;
      opt.keep_findings = false;
      return beret_test(x, y, opt).rejected;
    }
  }
  throw std::invalid_argument("unknown method");
}

struct PowerPoint {
  int noise_level = 0;
  std::uint64_t replicates = 0;
  std::uint64_t rejections = 0;
  double power = 0.0;
};

struct PowerCurve {
  std::string method;
  std::string scenario;
  std::string placement;
  double alpha = 0.05;
  std::vector<PowerPoint> points;
};

/// Monte Carlo power over a noise-level grid: fresh data per replicate from
/// (seed, level, replicate)-derived streams, so the curve is identical for
/// any thread count.
inline PowerCurve estimate_power(const MethodConfig& mc, const ScenarioSpec& base,
                                 int level_lo, int level_hi, std::uint64_t replicates,
                                 double alpha, std::uint64_t seed, unsigned threads = 1) {
  if (replicates < 1) throw std::invalid_argument("replicates must be positive");
  if (level_lo < 1 || level_hi > 20 || level_lo > level_hi) {
    throw std::invalid_argument("noise_level out of range");
  }
  const std::size_t levels = static_cast<std::size_t>(level_hi - level_lo + 1);
  std::vector<std::uint8_t> rejected(levels * replicates, 0);
  parallel_for(levels * replicates, threads, [&](std::size_t idx) {
    const int level = level_lo + static_cast<int>(idx / replicates);
    const std::uint64_t rep = idx % replicates;
    ScenarioSpec spec = base;
    spec.noise_level = level;
    spec.seed = derive_seed(seed, kSeedScenario, static_cast<std::uint64_t>(level), rep);
    const Dataset ds = generate_scenario(spec);
    const std::uint64_t mseed =
        derive_seed(seed, kSeedMethod, static_cast<std::uint64_t>(level), rep);
    rejected[idx] = method_rejects(mc, ds.x, ds.y, alpha, mseed) ? 1 : 0;
  });

  PowerCurve curve;
  curve.method = method_name(mc.kind);
  curve.scenario = shape_name(base.shape);
  curve.placement = placement_name(base.placement);
  curve.alpha = alpha;
  for (std::size_t l = 0; l < levels; ++l) {
    PowerPoint pt;
    pt.noise_level = level_lo + static_cast<int>(l);
    pt.replicates = replicates;
    for (std::uint64_t r = 0; r < replicates; ++r) pt.rejections += rejected[l * replicates + r];
    pt.power = static_cast<double>(pt.rejections) / static_cast<double>(replicates);
    curve.points.push_back(pt);
  }
  return curve;
}

/// Null rejection rate over R replicates of independent data.
inline double type_i_error(const MethodConfig& mc, std::size_t n, std::size_t p, std::size_t q,
                           std::uint64_t replicates, double alpha, std::uint64_t seed,
                           unsigned threads = 1) {
  if (replicates < 100) throw std::invalid_argument("replicates must be at least 100");
  std::vector<std::uint8_t> rejected(replicates, 0);
  parallel_for(replicates, threads, [&](std::size_t rep) {
    RandomStream rs(derive_seed(seed, kSeedScenario, 0, rep));
    Matrix x(n, p), y(n, q);
    for (auto& v : x.data) v = rs.normal();
    for (auto& v : y.data) v = rs.normal();
    const std::uint64_t mseed = derive_seed(seed, kSeedMethod, 0, rep);
    rejected[rep] = method_rejects(mc, x, y, alpha, mseed) ? 1 : 0;
  });
  std::uint64_t count = 0;
  for (auto r : rejected) count += r;
  return static_cast<double>(count) / static_cast<double>(replicates);
}

}  // namespace bexdep
