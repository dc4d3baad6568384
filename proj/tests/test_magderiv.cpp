// Magnetic derivative layer: value-space operators against the
// coefficient-space ladder oracle, commutation relations, ground-state
// identities, Bernstein level sums and bounds, the recursion report, and the
// classical-derivative budgets.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "maglab/field.hpp"
#include "maglab/grid.hpp"
#include "maglab/magderiv.hpp"
#include "oracles.hpp"

using namespace maglab;
using Catch::Approx;

namespace {

FieldMatrix canonical_2d(double c) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 2);
  b(0, 1) = c;
  b(1, 0) = -c;
  return FieldMatrix(b);
}

FieldMatrix block_3d(double c) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 3);
  b(0, 1) = c;
  b(1, 0) = -c;
  return FieldMatrix(b);
}

FieldMatrix blocks_4d(double c0, double c1) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 4);
  b(0, 1) = c0;
  b(1, 0) = -c0;
  b(2, 3) = c1;
  b(3, 2) = -c1;
  return FieldMatrix(b);
}

// Closed-form bottom state on the adapted grid: per block
// sqrt(C/2pi) exp(-C r^2 / 4), per null axis the unit Gaussian of the axis
// scale.
CVec bottom_state(const LandauContext& ctx) {
  CVec f(ctx.grid.size());
  const int blocks = ctx.nf.block_count();
  for (std::int64_t i = 0; i < ctx.grid.size(); ++i) {
    double v = 1.0;
    for (int j = 0; j < blocks; ++j) {
      const double c = ctx.nf.frequencies[j];
      const double y0 = ctx.grid.coordinate(2 * j)(i);
      const double y1 = ctx.grid.coordinate(2 * j + 1)(i);
      v *= std::sqrt(c / (2.0 * kPi)) *
           std::exp(-0.25 * c * (y0 * y0 + y1 * y1));
    }
    for (int a = 2 * blocks; a < ctx.dim(); ++a) {
      const double s = ctx.grid.axis(a).scale;
      const double t = ctx.grid.coordinate(a)(i);
      v *= std::pow(kPi, -0.25) / std::sqrt(s) *
           std::exp(-0.5 * t * t / (s * s));
    }
    f(i) = v;
  }
  return f;
}

double rel_sup(const CVec& got, const CVec& expect) {
  const double scale = expect.cwiseAbs().maxCoeff();
  return (got - expect).cwiseAbs().maxCoeff() / (scale > 0 ? scale : 1.0);
}

}  // namespace

TEST_CASE("grid-frame magnetic derivative matches the coefficient ladder") {
  struct Setup {
    FieldMatrix field;
    int nodes;
    int degmax;
    double sigma;
  };
  const Setup setups[] = {
      {canonical_2d(1.3), 14, 6, 1.0},
      {block_3d(0.9), 10, 4, 1.1},
      {blocks_4d(1.0, 0.6), 8, 3, 1.0},
  };
  for (const Setup& s : setups) {
    const LandauContext ctx = make_context(s.field, s.nodes, s.sigma);
    const oracles::LadderOracle lad(ctx);
    for (std::uint64_t seed : {11u, 12u}) {
      const CVec coef = lad.random_coefficients(s.degmax, seed);
      const CVec f = lad.synthesize(coef);
      // quadrature norm equals coefficient norm
      REQUIRE(ctx.grid.norm_sq(f) == Approx(coef.squaredNorm()).epsilon(1e-12));
      for (int m = 0; m < ctx.dim(); ++m) {
        const CVec got = magnetic_derivative_y(ctx, m, f);
        const CVec expect = lad.synthesize(lad.tilde(m, coef));
        REQUIRE(rel_sup(got, expect) <= 1e-10);
      }
      for (int k = 0; k < ctx.dim(); ++k) {
        const CVec got = magnetic_derivative(ctx, k, f);
        const CVec expect = lad.synthesize(lad.tilde_x(ctx, k, coef));
        REQUIRE(rel_sup(got, expect) <= 1e-10);
      }
    }
  }
}

TEST_CASE("commutator identity on random fields and functions") {
  std::mt19937_64 rng(2026);
  const Eigen::MatrixXd b = oracles::random_antisymmetric(3, rng);
  const FieldMatrix field(b);
  const LandauContext ctx = make_context(field, 12, 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CVec f = random_class_function(ctx.grid, 5, 900 + seed);
    std::vector<CVec> df(3);
    for (int k = 0; k < 3; ++k) df[k] = magnetic_derivative(ctx, k, f);
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) {
        const CVec lhs = magnetic_derivative(ctx, k, df[l]) -
                         magnetic_derivative(ctx, l, df[k]);
        const CVec expect = Cplx(0.0, b(k, l)) * f;
        REQUIRE(std::sqrt(ctx.grid.norm_sq(lhs - expect)) <=
                1e-12 * (1.0 + std::abs(b(k, l))));
      }
  }
}

TEST_CASE("hamiltonian: oracle, self-adjointness, nonnegativity") {
  std::mt19937_64 rng(77);
  const FieldMatrix field(oracles::random_antisymmetric(3, rng));
  const LandauContext ctx = make_context(field, 12, 1.0);
  const oracles::LadderOracle lad(ctx);
  const CVec coef = lad.random_coefficients(5, 5);
  const CVec f = lad.synthesize(coef);
  const CVec hf = apply_h(ctx, f);
  REQUIRE(rel_sup(hf, lad.synthesize(lad.hamiltonian(coef))) <= 1e-10);

  const CVec g = random_class_function(ctx.grid, 5, 31);
  const CVec hg = apply_h(ctx, g);
  const Cplx a1 = ctx.grid.inner(f, hg);
  const Cplx a2 = ctx.grid.inner(hf, g);
  REQUIRE(std::abs(a1 - a2) <= 1e-8 * (1.0 + std::abs(a1)));
  REQUIRE(std::real(ctx.grid.inner(f, hf)) >= -1e-10);
  REQUIRE(std::real(ctx.grid.inner(g, hg)) >= -1e-10);
}

TEST_CASE("bottom state of one block: energy, level sums") {
  const LandauContext ctx = make_context(canonical_2d(1.0), 16);
  const CVec psi = bottom_state(ctx);
  REQUIRE(ctx.grid.norm_sq(psi) == Approx(1.0).epsilon(1e-13));
  const CVec hpsi = apply_h(ctx, psi);
  REQUIRE(rel_sup(hpsi, psi) <= 1e-11);  // eigenvalue C = 1
  REQUIRE(std::real(ctx.grid.inner(psi, hpsi)) == Approx(1.0).epsilon(1e-12));

  const std::vector<double> lv = bernstein_levels(ctx, psi, 2);
  REQUIRE(lv[0] == Approx(1.0).epsilon(1e-12));
  REQUIRE(lv[1] == Approx(1.0).epsilon(1e-11));   // = <psi, H psi>
  REQUIRE(lv[2] == Approx(3.0).epsilon(1e-11));   // next level at 3C^2

  // frequency 2: energy scales linearly, level sums quadratically
  const LandauContext ctx2 = make_context(canonical_2d(2.0), 16);
  const CVec psi2 = bottom_state(ctx2);
  REQUIRE(std::real(ctx2.grid.inner(psi2, apply_h(ctx2, psi2))) ==
          Approx(2.0).epsilon(1e-12));
  REQUIRE(bernstein_lhs(ctx2, psi2, 2) == Approx(12.0).epsilon(1e-11));
}

TEST_CASE("bottom state with a null direction") {
  const double sigma = 1.3;
  const LandauContext ctx = make_context(block_3d(2.0), 14, sigma);
  const CVec phi = bottom_state(ctx);
  REQUIRE(ctx.grid.norm_sq(phi) == Approx(1.0).epsilon(1e-12));
  // block contributes C, the free direction (1/2) sigma^{-2}
  const double expect = 2.0 + 0.5 / (sigma * sigma);
  REQUIRE(std::real(ctx.grid.inner(phi, apply_h(ctx, phi))) ==
          Approx(expect).epsilon(1e-12));
}

TEST_CASE("zero field reduces to plain derivatives") {
  const FieldMatrix zero(Eigen::MatrixXd::Zero(2, 2));
  const LandauContext ctx = make_context(zero, 12, 1.0);
  REQUIRE(ctx.nf.nullity == 2);
  const CVec f = bottom_state(ctx);  // plain Gaussian e^{-|x|^2/2} normalized
  const CVec got = magnetic_derivative(ctx, 0, f);
  CVec expect(f.size());
  for (std::int64_t i = 0; i < f.size(); ++i)
    expect(i) = Cplx(0.0, -ctx.grid.coordinate(0)(i)) * f(i);
  REQUIRE(rel_sup(got, expect) <= 1e-11);
  // oracle route for H = -Laplacian
  const oracles::LadderOracle lad(ctx);
  const CVec coef = lad.random_coefficients(5, 17);
  REQUIRE(rel_sup(apply_h(ctx, lad.synthesize(coef)),
                  lad.synthesize(lad.hamiltonian(coef))) <= 1e-10);
}

TEST_CASE("bernstein bound formulas: pinned values") {
  REQUIRE(bernstein_bound(2, 1.0, 1.0, 1) == Approx(2.0).epsilon(1e-15));
  REQUIRE(bernstein_bound(3, 2.0, 2.0, 2) == Approx(81.0).epsilon(1e-15));
  REQUIRE(bernstein_bound(5, 3.7, 0.2, 0) == 1.0);
  REQUIRE(bernstein_prime_bound(2, 1.0, 1.0, 1) ==
          Approx(2.0 * std::sqrt(2.0)).epsilon(1e-15));
  REQUIRE(bernstein_prime_bound(2, 1.0, 1.0, 2) == Approx(12.0).epsilon(1e-15));
  REQUIRE(bernstein_prime_bound(4, 2.0, 1.0, 0) == 1.0);
  // matrix overloads agree with the scalar form
  const FieldMatrix f = canonical_2d(1.0);
  REQUIRE(bernstein_bound(f, 1.0, 1) == Approx(2.0).epsilon(1e-13));
  REQUIRE(bernstein_prime_bound(f, 1.0, 2) == Approx(12.0).epsilon(1e-13));
  REQUIRE_THROWS_AS(bernstein_bound(2, 0.0, 1.0, 1), validation_error);
  REQUIRE_THROWS_AS(bernstein_bound(2, 1.0, 1.0, -1), validation_error);
  REQUIRE_THROWS_AS(bernstein_prime_bound(0, 1.0, 1.0, 1), validation_error);
}

TEST_CASE("bernstein level sums: oracle, inequality, dual route, frames") {
  // oracle equality and the inequality on a full-rank 2d block
  {
    const LandauContext ctx = make_context(canonical_2d(1.0), 16);
    const oracles::LadderOracle lad(ctx);
    const double e_window = (4.0 * 6 - 3.0) * 1.0;  // degrees < 6 live below
    for (std::uint64_t seed : {5u, 6u, 7u, 8u, 9u}) {
      const CVec coef = lad.random_coefficients(6, seed);
      const CVec f = lad.synthesize(coef);
      const std::vector<double> mine = bernstein_levels(ctx, f, 4);
      const std::vector<double> ref = lad.bernstein_levels(coef, 4);
      for (int m = 0; m <= 4; ++m)
        REQUIRE(mine[m] == Approx(ref[m]).epsilon(1e-9));
      const auto rows = bernstein_report(ctx, f, 4, e_window);
      for (const auto& r : rows) REQUIRE(r.ratio <= 1.0 + 1e-12);
    }
  }
  // dual route (integration by parts) and frame invariance on a rotated field
  {
    std::mt19937_64 rng(4242);
    const FieldMatrix field(oracles::random_antisymmetric(3, rng));
    const LandauContext ctx = make_context(field, 12, 1.0);
    const CVec f = random_class_function(ctx.grid, 4, 2718);
    const std::vector<double> lv = bernstein_levels(ctx, f, 2);
    REQUIRE(bernstein_lhs_by_parts(ctx, f, 2) ==
            Approx(lv[2]).epsilon(1e-10));
    REQUIRE(bernstein_lhs_by_parts(ctx, f, 1) ==
            Approx(lv[1]).epsilon(1e-11));
    // sum over original-frame words, assembled with tilde_x, same totals
    double direct1 = 0.0, direct2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const CVec dk = magnetic_derivative(ctx, k, f);
      direct1 += ctx.grid.norm_sq(dk);
      for (int l = 0; l < 3; ++l)
        direct2 += ctx.grid.norm_sq(magnetic_derivative(ctx, l, dk));
    }
    REQUIRE(direct1 == Approx(lv[1]).epsilon(1e-11));
    REQUIRE(direct2 == Approx(lv[2]).epsilon(1e-10));
  }
  // two commuting blocks in d = 4
  {
    const LandauContext ctx = make_context(blocks_4d(1.0, 0.6), 8);
    const oracles::LadderOracle lad(ctx);
    const CVec coef = lad.random_coefficients(3, 3);
    const CVec f = lad.synthesize(coef);
    const std::vector<double> mine = bernstein_levels(ctx, f, 2);
    const std::vector<double> ref = lad.bernstein_levels(coef, 2);
    for (int m = 0; m <= 2; ++m)
      REQUIRE(mine[m] == Approx(ref[m]).epsilon(1e-9));
    const auto rows = bernstein_report(ctx, f, 2, (4.0 * 3 - 3.0) * 1.6);
    for (const auto& r : rows) REQUIRE(r.ratio <= 1.0 + 1e-12);
  }
}

TEST_CASE("resolution guard rejects saturated functions") {
  const LandauContext ctx = make_context(canonical_2d(1.0), 8);
  const CVec full = random_class_function(ctx.grid, 8, 1);  // top row occupied
  try {
    magnetic_derivative_y(ctx, 0, full);
    FAIL("expected a resolution error");
  } catch (const invariant_error& e) {
    REQUIRE(e.assertion == "magderiv.resolution");
  }
  REQUIRE_THROWS_AS(bernstein_levels(ctx, full, 2), invariant_error);
  REQUIRE_THROWS_AS(verify_recursion(ctx, full, 1), invariant_error);

  const CVec low = random_class_function(ctx.grid, 4, 2);
  REQUIRE_NOTHROW(bernstein_levels(ctx, low, 4));
  // recursion at m_max = 3 needs eight clear rows; only four are clear
  REQUIRE_THROWS_AS(verify_recursion(ctx, low, 3), invariant_error);
}

TEST_CASE("recursion report: identities, routes, and spectral bounds") {
  const LandauContext ctx = make_context(canonical_2d(1.0), 20);
  const oracles::LadderOracle lad(ctx);
  const CVec f = lad.synthesize(lad.random_coefficients(6, 2024));
  const RecursionReport rep = verify_recursion(ctx, f, 3);

  REQUIRE(rep.x0_vs_energy <= 1e-12);
  REQUIRE(rep.y0_identity_ratio == Approx(1.0).epsilon(1e-10));
  REQUIRE(rep.q_x[0] == Approx(rep.levels[1]).epsilon(1e-11));
  REQUIRE(rep.q_x[1] == Approx(rep.levels[2]).epsilon(1e-10));
  for (int m = 1; m <= 3; ++m) {
    REQUIRE(rep.x_route_residual[m - 1] <= 1e-10);
    REQUIRE(rep.y_route_residual[m - 1] <= 1e-10);
    REQUIRE(rep.two_branch_ratio[m - 1] <= 1.0 + 1e-10);
    REQUIRE(rep.two_branch_ratio_tight[m - 1] <= 1.0 + 1e-10);
    REQUIRE(rep.product_ratio[m - 1] <= 1.0 + 1e-10);
    REQUIRE(rep.product_ratio_loose[m - 1] <=
            rep.product_ratio[m - 1] + 1e-12);
    // the published weight is looser, so its ratio is smaller
    REQUIRE(rep.two_branch_ratio[m - 1] <=
            rep.two_branch_ratio_tight[m - 1] + 1e-12);
  }

  // ground state: exact values, and the tight two-branch bound saturates
  const CVec psi = bottom_state(ctx);
  const RecursionReport ground = verify_recursion(ctx, psi, 1);
  REQUIRE(ground.q_x[0] == Approx(1.0).epsilon(1e-11));
  REQUIRE(ground.q_y[0] == Approx(1.0).epsilon(1e-11));
  REQUIRE(ground.q_x[1] == Approx(3.0).epsilon(1e-11));
  REQUIRE(ground.q_y[1] == Approx(3.0).epsilon(1e-11));
  REQUIRE(ground.two_branch_ratio_tight[0] == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("classical derivatives of the squared density") {
  const LandauContext ctx = make_context(canonical_2d(1.0), 24);
  const CVec psi = bottom_state(ctx);

  const ClassicalReport r0 = classical_derivative_l1(ctx, psi, 0, 1.0);
  REQUIRE(r0.sum_l1 == Approx(1.0).epsilon(1e-4));
  REQUIRE(r0.bound == Approx(1.0).epsilon(1e-12));

  // sum_k || d_k |psi|^2 ||_1 = 2 sqrt(2/pi) in closed form
  const ClassicalReport r1 = classical_derivative_l1(ctx, psi, 1, 1.0);
  REQUIRE(r1.sum_l1 ==
          Approx(2.0 * std::sqrt(2.0 / kPi)).epsilon(0.03));
  REQUIRE(r1.ratio <= 1.0 + 1e-4);

  for (int m = 2; m <= 4; ++m) {
    const ClassicalReport rm = classical_derivative_l1(ctx, psi, m, 1.0);
    REQUIRE(rm.ratio <= 1.0 + 1e-4);
  }

  // a generic spectral-window function obeys the same budgets
  const oracles::LadderOracle lad(ctx);
  const CVec f = lad.synthesize(lad.random_coefficients(5, 77));
  const double e_window = (4.0 * 5 - 3.0) * 1.0;
  for (int m = 0; m <= 4; ++m) {
    const ClassicalReport rm = classical_derivative_l1(ctx, f, m, e_window);
    REQUIRE(rm.ratio <= 1.0 + 1e-4);
  }

  // analyticity witness stays under the budget-implied cap up to order 6
  const std::vector<double> w = analyticity_witness(ctx, psi, 6);
  const double beta = 1.0;
  for (int m = 1; m <= 6; ++m) {
    const double cap =
        std::pow(bernstein_prime_bound(2, 1.0, beta, m), 1.0 / m) /
        std::sqrt(double(m));
    REQUIRE(w[m - 1] <= cap * 1.10);
  }

  // sup-norm budgets with the constant fitted at order zero
  const SupBudgetReport sup_psi = classical_sup_budget(ctx, psi, 4, 1.0);
  REQUIRE(sup_psi.fitted_ratio[0] == Approx(1.0).epsilon(1e-12));
  for (int m = 1; m <= 4; ++m)
    REQUIRE(sup_psi.fitted_ratio[m] <= 1.0 + 0.05);
  const SupBudgetReport sup_f = classical_sup_budget(ctx, f, 4, e_window);
  for (int m = 1; m <= 4; ++m)
    REQUIRE(sup_f.fitted_ratio[m] <= 1.0 + 0.05);

  // resolution gate on the squared density
  const LandauContext tiny = make_context(canonical_2d(1.0), 6);
  const CVec g = random_class_function(tiny.grid, 4, 5);
  REQUIRE_THROWS_AS(classical_levels(tiny, g, 3), invariant_error);
}
