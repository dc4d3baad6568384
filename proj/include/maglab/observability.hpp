#pragma once
// Spectral-inequality experiments: restricted Gram matrices over sampling
// sets, the numerical constant 1/lambda_min on truncated subspaces, the
// closed-form exponential bound with its proof constants, the optimality
// scan against Gaussian tails, the thickness-necessity probe built on
// magnetic translations, the good/bad rectangle decomposition of |f|^2,
// and a Monte-Carlo check of the one-dimensional propagation inequality
// for low-degree polynomials.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "maglab/eigenbasis.hpp"
#include "maglab/errors.hpp"
#include "maglab/field.hpp"
#include "maglab/magderiv.hpp"
#include "maglab/thickset.hpp"
#include "maglab/tolerances.hpp"

namespace maglab {

// ---- Exponential bound --------------------------------------------------------

struct BoundConstants {
  double c1 = 1.0;  // base of the (c1 / rho) power
  double c2 = 1.0;  // constant part of the exponent
  double c3 = 1.0;  // coefficient of |l|_1 sqrt(E)
  double c4 = 1.0;  // coefficient of the magnetic exponent terms
};

// Explicit constants assembled from the proof chain: the geometric base
// 24 * area(S^{d-1}) * d^{d/2} and the exponent written as
// 1 + (2/ln 2) * [ln(2(d+2)) + A1 |l|_1 sqrt(E) + A3 |l|_1^2 sqrt(|B^2|_1)]
// with A1 = 10 sqrt(2) (d+2) d^{(d+1)/2} and A3 = 200 (d+2)^2 d^{d+1}.
inline BoundConstants proof_constants(int d) {
  if (d < 2) throw validation_error("bound.dim", "dimension must be >= 2");
  const double sphere_area =
      2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
  const double to_exponent = 2.0 / std::numbers::ln2;
  const double a1 = 10.0 * std::numbers::sqrt2 * (d + 2) *
                    std::pow(double(d), 0.5 * (d + 1));
  const double a3 = 200.0 * (d + 2) * (d + 2) * std::pow(double(d), d + 1);
  BoundConstants k;
  k.c1 = 24.0 * sphere_area * std::pow(double(d), 0.5 * d);
  k.c2 = 1.0 + to_exponent * std::log(2.0 * (d + 2));
  k.c3 = to_exponent * a1;
  k.c4 = to_exponent * a3;
  return k;
}

// Three published shapes of the exponent's magnetic part:
//   base:              c4 |l|_1^2 sqrt(|B^2|_1)
//   quarter_root:      c4 (|l|_1 |B^2|_1^{1/4} + |l|_1^2 sqrt(|B^2|_1))
//   energy_controlled: sqrt(|B^2|_1) replaced by its bound sqrt(c_d) E, so
//                      c3 (1 + c_d^{1/4}) |l|_1 sqrt(E) + c4 sqrt(c_d) |l|_1^2 E sqrt(|B|_1);
// the last two are inequivalent rewrites, kept selectable instead of merged.
enum class BoundVariant { base, quarter_root, energy_controlled };

inline const char* to_string(BoundVariant v) {
  switch (v) {
    case BoundVariant::base: return "base";
    case BoundVariant::quarter_root: return "quarter-root";
    case BoundVariant::energy_controlled: return "energy-controlled";
  }
  return "?";
}

struct TheoremBound {
  BoundConstants constants;
  std::string variant;
  double exponent = 0.0;
  double log_bound = 0.0;    // natural log of the bound, always finite
  double log10_bound = 0.0;  // same in decimal digits
  double bound = 0.0;        // exp(log_bound); +inf when it overflows
};

inline TheoremBound theorem_bound(const Eigen::VectorXd& l, double rho,
                                  double energy, const FieldMatrix& field,
                                  const BoundConstants& constants,
                                  BoundVariant variant = BoundVariant::base,
                                  double c_d = 0.0) {
  const int d = static_cast<int>(field.b.rows());
  if (l.size() != d)
    throw validation_error("bound.l", "need one side length per dimension");
  for (int a = 0; a < d; ++a)
    if (!(l(a) > 0.0)) throw validation_error("bound.l", "sides must be > 0");
  if (!(rho > 0.0) || rho > 1.0)
    throw validation_error("bound.rho", "density must lie in (0, 1]");
  if (!(energy > 0.0))
    throw validation_error("bound.energy", "energy cutoff must be positive");
  if (!(constants.c1 > 0.0) || !(constants.c2 > 0.0) ||
      !(constants.c3 > 0.0) || !(constants.c4 > 0.0))
    throw validation_error("bound.constants", "constants must be positive");
  if (c_d <= 0.0) c_d = double(d);  // valid: |M|_1 <= d |M|_op

  const FieldNorms norms = field_norms(field, normal_form(field));
  const double beta = std::sqrt(norms.one_norm_bsq);
  const double l1 = l.sum();
  const double root_e = std::sqrt(energy);

  TheoremBound out;
  out.constants = constants;
  out.variant = to_string(variant);
  switch (variant) {
    case BoundVariant::base:
      out.exponent = constants.c2 + constants.c3 * l1 * root_e +
                     constants.c4 * l1 * l1 * beta;
      break;
    case BoundVariant::quarter_root:
      out.exponent = constants.c2 + constants.c3 * l1 * root_e +
                     constants.c4 * (l1 * std::sqrt(beta) + l1 * l1 * beta);
      break;
    case BoundVariant::energy_controlled: {
      const double b_one = field.b.cwiseAbs().colwise().sum().maxCoeff();
      out.exponent =
          constants.c2 +
          constants.c3 * (1.0 + std::pow(c_d, 0.25)) * l1 * root_e +
          constants.c4 * std::sqrt(c_d) * l1 * l1 * energy * std::sqrt(b_one);
      break;
    }
  }
  if (!(out.exponent >= 0.0))
    throw invariant_error("bound.exponent", "exponent must be nonnegative");
  out.log_bound = out.exponent * std::log(constants.c1 / rho);
  out.log10_bound = out.log_bound / std::numbers::ln10;
  out.bound = std::exp(out.log_bound);
  return out;
}

inline TheoremBound theorem_bound(const Eigen::VectorXd& l, double rho,
                                  double energy, const FieldMatrix& field) {
  return theorem_bound(l, rho, energy, field,
                       proof_constants(static_cast<int>(field.b.rows())));
}

// ---- Restricted Gram matrices ---------------------------------------------------

namespace detail {

// Product quadrature over a ball: Gauss-Legendre in the radius and, for the
// angle(s), a trapezoid circle (d=2) or Gauss in cos(theta) times a trapezoid
// circle (d=3).  The integrands are polynomials times Gaussians, so these
// converge superexponentially.
struct BallRule {
  Eigen::MatrixXd offsets;  // points x d, relative to the center
  Eigen::VectorXd weights;
};

inline BallRule ball_rule(int d, double radius, int radial, int angular) {
  BallRule rule;
  const Rule1d rs = gauss_legendre(radial, 0.0, radius);
  if (d == 2) {
    rule.offsets.resize(radial * angular, 2);
    rule.weights.resize(radial * angular);
    const double wa = 2.0 * std::numbers::pi / angular;
    for (int i = 0; i < radial; ++i)
      for (int j = 0; j < angular; ++j) {
        const double s = rs.nodes(i), t = wa * j;
        rule.offsets.row(i * angular + j) << s * std::cos(t), s * std::sin(t);
        rule.weights(i * angular + j) = rs.weights(i) * s * wa;
      }
    return rule;
  }
  if (d == 3) {
    const int polar = std::max(4, angular / 2);
    const Rule1d us = gauss_legendre(polar, -1.0, 1.0);
    rule.offsets.resize(radial * polar * angular, 3);
    rule.weights.resize(radial * polar * angular);
    const double wa = 2.0 * std::numbers::pi / angular;
    Eigen::Index at = 0;
    for (int i = 0; i < radial; ++i)
      for (int k = 0; k < polar; ++k)
        for (int j = 0; j < angular; ++j, ++at) {
          const double s = rs.nodes(i), u = us.nodes(k), t = wa * j;
          const double ring = s * std::sqrt(std::max(0.0, 1.0 - u * u));
          rule.offsets.row(at) << ring * std::cos(t), ring * std::sin(t),
              s * u;
          rule.weights(at) = rs.weights(i) * s * s * us.weights(k) * wa;
        }
    return rule;
  }
  throw validation_error("gram.ball", "smooth ball rules cover d = 2 and 3");
}

// Values of every translated basis mode (T_shift phi_m)(x) at the given
// physical points; shift = 0 gives the plain modes.  Evaluation contracts
// the stored degree tensors against per-axis Hermite rows, so it is exact
// at any point, on or off the grid.
inline Eigen::MatrixXcd mode_values_at(const SpectralBasis& basis,
                                       const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& shift) {
  const int d = basis.nf.dim();
  if (x.cols() != d)
    throw validation_error("gram.points", "points must have d columns");
  const std::vector<int>& ext = basis.coef_extents;
  std::int64_t box = 1;
  for (int e : ext) box *= e;
  const Eigen::VectorXd bshift = basis.ctx.field.b * shift;
  const Eigen::MatrixXd coef_re = basis.coef.real();
  const Eigen::MatrixXd coef_im = basis.coef.imag();
  Eigen::MatrixXcd values(x.rows(), basis.size());
  Eigen::VectorXd kron(box);
  std::vector<Eigen::VectorXd> rows(d);
  std::vector<int> idx(d);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Eigen::VectorXd y =
        basis.nf.u.transpose() * (x.row(r).transpose() - shift);
    for (int a = 0; a < d; ++a) {
      const Axis& ax = basis.ctx.grid.axis(a);
      rows[a] = hermite_functions(ext[a] - 1, y(a) / ax.scale) /
                std::sqrt(ax.scale);
    }
    std::fill(idx.begin(), idx.end(), 0);
    for (std::int64_t k = 0; k < box; ++k) {
      double prod = 1.0;
      for (int a = 0; a < d; ++a) prod *= rows[a](idx[a]);
      kron(k) = prod;
      for (int a = 0; a < d; ++a) {
        if (++idx[a] < ext[a]) break;
        idx[a] = 0;
      }
    }
    const double chi = -0.5 * x.row(r).dot(bshift);
    const Cplx phase = std::exp(Cplx(0.0, chi));
    values.row(r) = phase * (kron.transpose() * coef_re).eval() +
                    phase * Cplx(0.0, 1.0) *
                        (kron.transpose() * coef_im).eval();
  }
  return values;
}

// Radius beyond which every stored mode is quadrature-invisible: the class
// envelope exp(-u^2/2) has decayed past the largest node by several units.
inline double support_radius(const SpectralBasis& basis) {
  double r = 0.0;
  for (int a = 0; a < basis.nf.dim(); ++a) {
    const Axis& ax = basis.ctx.grid.axis(a);
    r = std::max(r, ax.nodes.cwiseAbs().maxCoeff() + 4.0 * ax.scale);
  }
  return r;
}

// Gram of the shifted modes {T_shift phi_i} over the complement of balls of
// radius `radius` centered at (period Z)^d + offset: identity minus one
// smooth ball quadrature per reachable hole.
inline Eigen::MatrixXcd hole_gram(const SpectralBasis& basis, double period,
                                  double radius,
                                  const Eigen::VectorXd& offset,
                                  const Eigen::VectorXd& shift, int radial,
                                  int angular) {
  const int d = basis.nf.dim();
  Eigen::MatrixXcd gram =
      Eigen::MatrixXcd::Identity(basis.size(), basis.size());
  const double reach = support_radius(basis) + radius;
  const BallRule rule = ball_rule(d, radius, radial, angular);
  std::vector<int> lo(d), hi(d), k(d);
  for (int a = 0; a < d; ++a) {
    lo[a] = static_cast<int>(
        std::ceil((shift(a) - offset(a) - reach) / period));
    hi[a] = static_cast<int>(
        std::floor((shift(a) - offset(a) + reach) / period));
    if (lo[a] > hi[a]) return gram;
    k[a] = lo[a];
  }
  Eigen::MatrixXd points(rule.offsets.rows(), d);
  while (true) {
    Eigen::VectorXd center(d);
    for (int a = 0; a < d; ++a) center(a) = period * k[a] + offset(a);
    if ((center - shift).norm() <= reach) {
      points = rule.offsets;
      points.rowwise() += center.transpose();
      const Eigen::MatrixXcd v = mode_values_at(basis, points, shift);
      gram.noalias() -= v.adjoint() * rule.weights.asDiagonal() * v;
    }
    int a = 0;
    for (; a < d; ++a) {
      if (++k[a] <= hi[a]) break;
      k[a] = lo[a];
    }
    if (a == d) break;
  }
  return Eigen::MatrixXcd(0.5 * (gram + gram.adjoint()));
}

// Physical coordinates of every grid node, rows = nodes.
inline Eigen::MatrixXd grid_points(const LandauContext& ctx) {
  const int d = ctx.dim();
  Eigen::MatrixXd y(ctx.grid.size(), d);
  for (int a = 0; a < d; ++a) y.col(a) = ctx.grid.coordinate(a);
  return y * ctx.nf.u.transpose();  // row-wise x = U y
}

// Gram by node-indicator quadrature: exact for the grid's weight class but
// carries the set boundary at node resolution; used for the variants with
// no smooth decomposition.
inline Eigen::MatrixXcd node_gram(const SpectralBasis& basis,
                                  const SamplingSet& s) {
  const Eigen::MatrixXd points = grid_points(basis.ctx);
  const Eigen::VectorXd& w = basis.ctx.grid.weights();
  Eigen::VectorXd masked = Eigen::VectorXd::Zero(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (contains(s, points.row(i).transpose())) masked(i) = w(i);
  const Eigen::MatrixXcd gram =
      basis.values.adjoint() * masked.asDiagonal() * basis.values;
  return Eigen::MatrixXcd(0.5 * (gram + gram.adjoint()));
}

}  // namespace detail

// M_ij = <phi_i, 1_S phi_j>.  Full space is the identity; periodic holes in
// d <= 3 subtract one smooth ball quadrature per hole; stripes and bitmaps
// fall back to node-indicator quadrature on the basis grid.
inline Eigen::MatrixXcd restricted_gram(const SpectralBasis& basis,
                                        const SamplingSet& s,
                                        int radial = 32, int angular = 64) {
  if (s.d != basis.nf.dim())
    throw validation_error("gram.set", "set dimension mismatch");
  if (basis.size() == 0)
    throw validation_error("gram.basis", "basis has no modes");
  if (s.kind == SetKind::full_space)
    return Eigen::MatrixXcd::Identity(basis.size(), basis.size());
  if (s.kind == SetKind::periodic_holes && s.d <= 3)
    return detail::hole_gram(basis, s.hole_period, s.hole_radius,
                             Eigen::VectorXd::Zero(s.d),
                             Eigen::VectorXd::Zero(s.d), radial, angular);
  // coverage guard: every mode must carry its mass on the grid
  const Eigen::VectorXd& w = basis.ctx.grid.weights();
  for (int m = 0; m < basis.size(); ++m) {
    const double mass =
        (w.array() * basis.values.col(m).cwiseAbs2().array()).sum();
    if (std::abs(mass - 1.0) > 1e-6)
      throw invariant_error(
          "gram.coverage", "grid holds mass " + std::to_string(mass) +
                               " of mode " + std::to_string(m));
  }
  return detail::node_gram(basis, s);
}

// Gram of the magnetically translated modes {T_y phi_i} over S + y.  By
// unitarity this equals restricted_gram(basis, S) exactly in the continuum;
// it is computed independently (shifted holes, shifted modes, phases kept)
// so the agreement is a genuine covariance check.
inline Eigen::MatrixXcd translated_restricted_gram(const SpectralBasis& basis,
                                                   const SamplingSet& s,
                                                   const Eigen::VectorXd& y,
                                                   int radial = 32,
                                                   int angular = 64) {
  if (s.d != basis.nf.dim() || y.size() != s.d)
    throw validation_error("gram.set", "set or shift dimension mismatch");
  if (s.kind != SetKind::periodic_holes || s.d > 3)
    throw validation_error(
        "gram.translate",
        "joint translation covers the smooth hole variant only");
  return detail::hole_gram(basis, s.hole_period, s.hole_radius, y, y, radial,
                           angular);
}

// ---- Observability constant ----------------------------------------------------

struct ObservabilityResult {
  double lambda_min = 0.0;  // smallest restricted Gram eigenvalue
  double constant = 0.0;    // 1 / lambda_min, the subspace constant
  int l_max = 0;
  Eigen::VectorXcd worst;  // minimizing coefficient vector
  // companion run with the degeneracy cap raised by 4
  double lambda_min_companion = 0.0;
  double constant_companion = 0.0;
  int l_max_companion = 0;
  double truncation_delta = 0.0;  // relative gap between the two constants
};

namespace detail {

inline std::pair<double, Eigen::VectorXcd> gram_bottom(
    const Eigen::MatrixXcd& gram, const Tolerances& tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
  if (es.info() != Eigen::Success)
    throw invariant_error("observability.eigensolve",
                          "restricted Gram eigensolve failed");
  const double bottom = es.eigenvalues()(0);
  if (bottom < -1e-10)
    throw invariant_error(
        "observability.gram",
        "restricted Gram is indefinite: " + std::to_string(bottom));
  if (bottom > 1.0 + tol.eta_orth)
    throw invariant_error(
        "observability.gram",
        "restricted Gram exceeds unity: " + std::to_string(bottom));
  return {bottom, es.eigenvectors().col(0)};
}

}  // namespace detail

// Smallest eigenvalue of the restricted Gram, its inverse (the subspace
// constant), the minimizing function, and a truncation diagnostic from an
// independent run with the degeneracy cap raised by 4.
inline ObservabilityResult observability_constant(const BasisPtr& basis,
                                                  const SamplingSet& s,
                                                  const Tolerances& tol = {},
                                                  bool with_companion = true,
                                                  int radial = 32,
                                                  int angular = 64) {
  if (!basis) throw validation_error("observability.basis", "null basis");
  ObservabilityResult out;
  auto [bottom, worst] = detail::gram_bottom(
      restricted_gram(*basis, s, radial, angular), tol);
  out.lambda_min = bottom;
  out.constant = 1.0 / bottom;
  out.l_max = basis->l_max;
  out.worst = std::move(worst);
  if (with_companion) {
    const int nodes =
        static_cast<int>(basis->ctx.grid.axis(0).nodes.size()) + 4;
    const BasisPtr wide =
        build_basis(basis->nf, basis->cutoff, basis->l_max + 4,
                    basis->null_spec, nodes, basis->sigma_null, tol);
    auto [bottom2, worst2] = detail::gram_bottom(
        restricted_gram(*wide, s, radial, angular), tol);
    out.lambda_min_companion = bottom2;
    out.constant_companion = 1.0 / bottom2;
    out.l_max_companion = wide->l_max;
    out.truncation_delta =
        std::abs(out.constant_companion - out.constant) / out.constant;
  }
  return out;
}

// ---- Optimality scan -----------------------------------------------------------

struct OptimalityRow {
  double period = 0.0;
  double radius = 0.0;
  double mass = 0.0;          // bottom-state mass left on the punctured set
  double neg_log_mass = 0.0;
  double single_hole = 0.0;   // closed-form single-hole tail exp(-C r^2 / 2)
};

struct OptimalityScan {
  std::vector<OptimalityRow> rows;
  double slope = 0.0;      // fitted d(-log mass)/d(r^2)
  double intercept = 0.0;
  double floor = 0.0;      // C_min / 4, the guaranteed lower slope
  double oracle = 0.0;     // C_min / 2, the exact Gaussian-tail slope
};

// Ground state sitting centered in one hole of each lattice; the surviving
// mass decays like exp(-C_min r^2 / 2), demonstrating that the constant's
// exponent must grow quadratically with the rectangle scale.
inline OptimalityScan optimality_scan(double c_block, double rho,
                                      const std::vector<double>& periods,
                                      int nodes_per_axis = 24,
                                      const Tolerances& tol = {}) {
  if (!(c_block > 0.0))
    throw validation_error("optimality.field", "field strength must be > 0");
  if (!(rho > 0.0) || !(rho < 1.0))
    throw validation_error("optimality.rho", "density must lie in (0, 1)");
  if (periods.empty())
    throw validation_error("optimality.scan", "need at least one period");
  const double rel = std::sqrt((1.0 - rho) / unit_ball_volume(2));
  if (!(rel < 0.5))
    throw validation_error("optimality.rho",
                           "density too small for disjoint holes");
  Eigen::MatrixXd b(2, 2);
  b << 0.0, c_block, -c_block, 0.0;
  const FieldMatrix field(b);
  const SpectralFunction ground =
      ground_state(normal_form(field), nodes_per_axis, 0.0, tol);
  const SpectralBasis& basis = *ground.basis;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);

  OptimalityScan out;
  out.floor = c_block / 4.0;
  out.oracle = c_block / 2.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double period : periods) {
    if (!(period > 0.0))
      throw validation_error("optimality.scan", "periods must be positive");
    OptimalityRow row;
    row.period = period;
    row.radius = rel * period;
    const double mass = std::real(
        detail::hole_gram(basis, period, row.radius, zero, zero, 48, 64)(0,
                                                                         0));
    const double check = std::real(
        detail::hole_gram(basis, period, row.radius, zero, zero, 96, 128)(0,
                                                                          0));
    if (std::abs(mass - check) > 1e-10)
      throw invariant_error(
          "optimality.resolution",
          "hole quadrature unresolved at period " + std::to_string(period));
    row.mass = mass;
    row.neg_log_mass = -std::log(mass);
    row.single_hole = std::exp(-0.5 * c_block * row.radius * row.radius);
    out.rows.push_back(row);
    const double x = row.radius * row.radius;
    sx += x;
    sy += row.neg_log_mass;
    sxx += x * x;
    sxy += x * row.neg_log_mass;
  }
  const double n = static_cast<double>(out.rows.size());
  const double var = sxx - sx * sx / n;
  out.slope = var > 0.0 ? (sxy - sx * sy / n) / var : 0.0;
  out.intercept = (sy - out.slope * sx) / n;
  return out;
}

// ---- Necessity probe -----------------------------------------------------------

struct NecessityEntry {
  Eigen::VectorXd y;
  double mass = 0.0;  // |T_y Psi_0|^2 mass left on the set
  bool warning = false;
};

struct NecessityReport {
  std::vector<NecessityEntry> entries;
  double min_mass = 1.0;
};

// Mass of the magnetically translated bottom state on S, per probe point:
// holes small everywhere force this above a fixed floor, while growing
// voids drive the minimum to zero -- the quantitative content of thickness
// being necessary.
inline NecessityReport necessity_probe(const FieldMatrix& field,
                                       const SamplingSet& s,
                                       const Eigen::MatrixXd& translates,
                                       int nodes_per_axis = 32,
                                       const Tolerances& tol = {}) {
  const int d = static_cast<int>(field.b.rows());
  if (s.d != d)
    throw validation_error("necessity.set", "set dimension mismatch");
  if (translates.cols() != d)
    throw validation_error("necessity.translates",
                           "translates must have d columns");
  const SpectralFunction ground =
      ground_state(normal_form(field), nodes_per_axis, 0.0, tol);
  const SpectralBasis& basis = *ground.basis;
  const bool smooth = s.kind == SetKind::periodic_holes && d <= 3;

  NecessityReport report;
  Eigen::MatrixXd points;
  Eigen::VectorXd w;
  std::vector<std::uint8_t> inside;
  if (!smooth && s.kind != SetKind::full_space) {
    points = detail::grid_points(basis.ctx);
    w = basis.ctx.grid.weights();
    inside = indicator(s, points);
  }
  for (Eigen::Index r = 0; r < translates.rows(); ++r) {
    NecessityEntry entry;
    entry.y = translates.row(r).transpose();
    if (s.kind == SetKind::full_space) {
      entry.mass = 1.0;
    } else if (smooth) {
      entry.mass = std::real(detail::hole_gram(basis, s.hole_period,
                                               s.hole_radius,
                                               Eigen::VectorXd::Zero(d),
                                               entry.y, 32, 64)(0, 0));
    } else {
      const TranslationResult moved =
          magnetic_translate(basis.ctx, grid_values(ground), entry.y, tol);
      double mass = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i)
        if (inside[i]) mass += w(i) * std::norm(moved.values(i));
      entry.mass = mass;
      entry.warning = moved.boundary_warning;
    }
    report.min_mass = std::min(report.min_mass, entry.mass);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

// ---- Good / bad rectangles -------------------------------------------------------

struct RectangleLabel {
  std::vector<int> index;  // cell = prod_a [index_a * l_a, (index_a + 1) l_a)
  double mass = 0.0;
  bool good = true;
  bool flagged = false;    // mass below the trivial threshold
  double worst_ratio = 0.0;
};

struct GoodBadReport {
  Eigen::VectorXd l;
  int m_max = 0;
  std::vector<RectangleLabel> cells;
  double total_mass = 0.0;
  double good_mass = 0.0;
  double good_fraction = 0.0;
  double slack = 0.0;  // cell-sum vs coefficient-norm discrepancy
  bool half_mass_ok = false;
};

// Partition physical space into l-rectangles and label each one good when
// every derivative of |f|^2 up to order m_max obeys the per-cell L1 bound
// (d+2)^{m+1} C'_B(m) |f|^2_{L2(cell)}.  Good cells must retain at least
// half of the total mass.
inline GoodBadReport good_bad_partition(const SpectralFunction& f,
                                        const Eigen::VectorXd& l,
                                        double energy, int m_max = 4) {
  if (!f.basis) throw validation_error("partition.basis", "null basis");
  const SpectralBasis& basis = *f.basis;
  const LandauContext& ctx = basis.ctx;
  const int d = ctx.dim();
  if (l.size() != d)
    throw validation_error("partition.l", "need one side per dimension");
  for (int a = 0; a < d; ++a)
    if (!(l(a) > 0.0))
      throw validation_error("partition.l", "sides must be positive");
  if (m_max < 0 || m_max > 6)
    throw validation_error("partition.m_max", "supported orders are 0..6");
  if (!(energy > 0.0))
    throw validation_error("partition.energy", "energy must be positive");
  for (int a = 0; a < d; ++a) {
    const int degree = 2 * (basis.coef_extents[a] - 1) + m_max;
    const int exact = 2 * static_cast<int>(ctx.grid.axis(a).nodes.size()) - 2;
    if (degree > exact)
      throw invariant_error("partition.resolution",
                            "grid cannot integrate the derivative class");
  }

  // |f|^2 on the grid and its physical-axis derivatives by multiset order;
  // mixed partials commute, so one representative per multiset suffices.
  const CVec values = grid_values(f);
  CVec density(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i)
    density(i) = std::norm(values(i));
  auto d_phys = [&](int k, const CVec& g) {
    CVec out = CVec::Zero(g.size());
    for (int a = 0; a < d; ++a) {
      const double u = basis.nf.u(k, a);
      if (u != 0.0)
        out += u * ctx.grid.apply_axis(a, ctx.grid.axis(a).diff, g);
    }
    return out;
  };
  std::vector<std::vector<std::vector<int>>> keys(m_max + 1);
  std::map<std::vector<int>, CVec> fields;
  keys[0] = {{}};
  fields[{}] = density;
  for (int m = 1; m <= m_max; ++m)
    for (const std::vector<int>& parent : keys[m - 1])
      for (int k = parent.empty() ? 0 : parent.back(); k < d; ++k) {
        std::vector<int> key = parent;
        key.push_back(k);
        fields[key] = d_phys(k, fields[parent]);
        keys[m].push_back(std::move(key));
      }

  // per-cell accumulation of the L2 mass and every derivative's L1 norm
  const Eigen::MatrixXd points = detail::grid_points(ctx);
  const Eigen::VectorXd& w = ctx.grid.weights();
  struct Cell {
    double mass = 0.0;
    std::map<std::vector<int>, double> l1;
  };
  std::map<std::vector<int>, Cell> cells;
  std::vector<int> id(d);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    for (int a = 0; a < d; ++a)
      id[a] = static_cast<int>(std::floor(points(i, a) / l(a)));
    Cell& cell = cells[id];
    cell.mass += w(i) * std::real(density(i));
    for (const auto& [key, field] : fields)
      cell.l1[key] += w(i) * std::abs(field(i));
  }

  GoodBadReport report;
  report.l = l;
  report.m_max = m_max;
  const FieldNorms& norms = ctx.norms;
  std::vector<double> budget(m_max + 1);
  for (int m = 0; m <= m_max; ++m)
    budget[m] = std::pow(double(d + 2), m + 1) *
                bernstein_prime_bound(d, energy,
                                      std::sqrt(norms.one_norm_bsq), m);
  for (const auto& [index, cell] : cells) {
    RectangleLabel label;
    label.index = index;
    label.mass = cell.mass;
    if (cell.mass < 1e-14) {
      label.flagged = true;  // trivially good: no mass to certify against
    } else {
      for (const auto& [key, l1] : cell.l1) {
        const double ratio =
            l1 / (budget[key.size()] * cell.mass);
        label.worst_ratio = std::max(label.worst_ratio, ratio);
      }
      label.good = label.worst_ratio <= 1.0;
    }
    report.total_mass += cell.mass;
    if (label.good) report.good_mass += cell.mass;
    report.cells.push_back(std::move(label));
  }
  report.good_fraction =
      report.total_mass > 0.0 ? report.good_mass / report.total_mass : 1.0;
  report.slack = std::abs(report.total_mass - f.norm_sq());
  report.half_mass_ok =
      report.good_mass >= 0.5 * f.norm_sq() - report.slack;
  return report;
}

inline GoodBadReport good_bad_partition(const SpectralFunction& f,
                                        const Eigen::VectorXd& l,
                                        int m_max = 4) {
  if (!f.basis) throw validation_error("partition.basis", "null basis");
  return good_bad_partition(f, l, f.basis->cutoff, m_max);
}

// ---- One-dimensional propagation check -------------------------------------------

struct RemezReport {
  int degree = 0;
  double e_measure = 0.0;
  int trials = 0;
  int violations = 0;
  double max_ratio = 0.0;  // observed sup / (factor * sup on E), worst trial
};

// Random low-degree polynomials phi with phi(0) = 1 against random finite
// unions of intervals E in [0,1] of fixed total measure: checks
//   sup_[0,1] |phi| <= (12 / |E|)^{2 log M / log 2} sup_E |phi|
// with M = sup_{|z| <= 4} |phi| taken on the circle |z| = 4 (maximum
// principle).  Sampled suprema under-estimate both sides, which only makes
// the check stricter.
inline RemezReport remez_1d_check(int degree, double e_measure, int trials,
                                  std::uint64_t seed) {
  if (degree < 0 || degree > 12)
    throw validation_error("remez.degree", "supported degrees are 0..12");
  if (!(e_measure > 0.0) || e_measure > 1.0)
    throw validation_error("remez.measure", "measure must lie in (0, 1]");
  if (trials < 1)
    throw validation_error("remez.trials", "need at least one trial");

  detail::NormalSampler normal(seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  auto eval = [&](const std::vector<Cplx>& c, Cplx z) {
    Cplx acc(0.0, 0.0);
    for (int k = degree; k >= 0; --k) acc = acc * z + c[k];
    return acc;
  };

  RemezReport report;
  report.degree = degree;
  report.e_measure = e_measure;
  report.trials = trials;
  for (int t = 0; t < trials; ++t) {
    std::vector<Cplx> coef(degree + 1);
    do {
      for (auto& c : coef) c = Cplx(normal(), normal());
    } while (std::abs(coef[0]) < 1e-8);
    const Cplx scale = 1.0 / coef[0];  // phi(0) = 1
    for (auto& c : coef) c *= scale;

    // E: a few disjoint intervals of total length e_measure
    const int pieces = 1 + static_cast<int>(rng() % 4);
    std::vector<double> len(pieces), gap(pieces + 1);
    double len_sum = 0.0, gap_sum = 0.0;
    for (double& v : len) len_sum += v = -std::log(
        ((rng() >> 11) + 1) * 0x1.0p-53);
    for (double& v : gap) gap_sum += v = -std::log(
        ((rng() >> 11) + 1) * 0x1.0p-53);
    for (double& v : len) v *= e_measure / len_sum;
    for (double& v : gap) v *= (1.0 - e_measure) / gap_sum;

    double sup_e = 0.0, at = 0.0;
    for (int p = 0; p < pieces; ++p) {
      at += gap[p];
      for (int i = 0; i <= 2000; ++i)
        sup_e = std::max(sup_e,
                         std::abs(eval(coef, at + len[p] * i / 2000.0)));
      at += len[p];
    }
    double sup_unit = 0.0;
    for (int i = 0; i <= 20000; ++i)
      sup_unit = std::max(sup_unit, std::abs(eval(coef, i / 20000.0)));
    double big_m = 1.0;  // >= |phi(0)|
    for (int i = 0; i < 2048; ++i) {
      const double a = 2.0 * std::numbers::pi * i / 2048.0;
      big_m = std::max(
          big_m, std::abs(eval(coef, 4.0 * Cplx(std::cos(a), std::sin(a)))));
    }
    const double factor = std::pow(
        12.0 / e_measure, 2.0 * std::log(big_m) / std::numbers::ln2);
    const double ratio = sup_unit / (factor * sup_e);
    report.max_ratio = std::max(report.max_ratio, ratio);
    if (ratio > 1.0) ++report.violations;
  }
  return report;
}

// ---- JSON ------------------------------------------------------------------------

inline nlohmann::json to_json(const TheoremBound& b) {
  nlohmann::json j;
  j["constants"] = {{"c1", b.constants.c1},
                    {"c2", b.constants.c2},
                    {"c3", b.constants.c3},
                    {"c4", b.constants.c4}};
  j["variant"] = b.variant;
  j["exponent"] = b.exponent;
  j["log10_bound"] = b.log10_bound;
  if (std::isfinite(b.bound)) j["bound"] = b.bound;
  return j;
}

inline nlohmann::json to_json(const ObservabilityResult& r) {
  nlohmann::json j;
  j["lambda_min"] = r.lambda_min;
  j["constant"] = r.constant;
  j["l_max"] = r.l_max;
  if (r.l_max_companion > 0) {
    j["lambda_min_companion"] = r.lambda_min_companion;
    j["constant_companion"] = r.constant_companion;
    j["l_max_companion"] = r.l_max_companion;
    j["truncation_delta"] = r.truncation_delta;
  }
  return j;
}

inline nlohmann::json to_json(const OptimalityScan& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const OptimalityRow& r : s.rows)
    rows.push_back({{"period", r.period},
                    {"radius", r.radius},
                    {"mass", r.mass},
                    {"neg_log_mass", r.neg_log_mass},
                    {"single_hole", r.single_hole}});
  return {{"rows", rows},
          {"slope", s.slope},
          {"intercept", s.intercept},
          {"floor", s.floor},
          {"oracle", s.oracle}};
}

inline nlohmann::json to_json(const NecessityReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const NecessityEntry& e : r.entries)
    rows.push_back(
        {{"y", std::vector<double>(e.y.data(), e.y.data() + e.y.size())},
         {"mass", e.mass},
         {"warning", e.warning}});
  return {{"entries", rows}, {"min_mass", r.min_mass}};
}

inline nlohmann::json to_json(const GoodBadReport& r) {
  return {{"l", std::vector<double>(r.l.data(), r.l.data() + r.l.size())},
          {"m_max", r.m_max},
          {"cells", r.cells.size()},
          {"total_mass", r.total_mass},
          {"good_mass", r.good_mass},
          {"good_fraction", r.good_fraction},
          {"slack", r.slack},
          {"half_mass_ok", r.half_mass_ok}};
}

inline nlohmann::json to_json(const RemezReport& r) {
  return {{"degree", r.degree},
          {"e_measure", r.e_measure},
          {"trials", r.trials},
          {"violations", r.violations},
          {"max_ratio", r.max_ratio}};
}

}  // namespace maglab
