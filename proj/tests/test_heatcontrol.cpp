#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "maglab/heatcontrol.hpp"
#include "oracles.hpp"

using namespace maglab;
using Catch::Approx;

namespace {

FieldMatrix planar_field(double c) {
  Eigen::MatrixXd b(2, 2);
  b << 0.0, c, -c, 0.0;
  return FieldMatrix(b);
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// direct antiderivative of the Gramian integrand entries
Eigen::MatrixXcd closed_gramian(const Eigen::VectorXd& energies,
                                const Eigen::MatrixXcd& restricted,
                                double horizon) {
  Eigen::MatrixXcd g = restricted;
  for (Eigen::Index i = 0; i < energies.size(); ++i)
    for (Eigen::Index j = 0; j < energies.size(); ++j) {
      const double sum = energies(i) + energies(j);
      g(i, j) *= sum > 0.0 ? -std::expm1(-horizon * sum) / sum : horizon;
    }
  return g;
}

double scalar_cost(double energy, double horizon) {
  return 2.0 * energy * std::exp(-2.0 * energy * horizon) /
         (-std::expm1(-2.0 * energy * horizon));
}

Eigen::VectorXcd mixed_u0(Eigen::Index n) {
  Eigen::VectorXcd u(n);
  for (Eigen::Index i = 0; i < n; ++i)
    u(i) = Cplx(std::cos(1.0 + 0.7 * double(i)),
                std::sin(0.3 + 1.3 * double(i)));
  return u / u.norm();
}

}  // namespace

TEST_CASE("heat factors form a contractive semigroup") {
  const BasisPtr basis =
      build_basis(normal_form(planar_field(1.0)), 4.0, 2, {}, 20);
  const Eigen::VectorXd id = heat_propagator(*basis, 0.0);
  REQUIRE(id.isApproxToConstant(1.0, 1e-15));

  const Eigen::VectorXd a = heat_propagator(*basis, 0.3);
  const Eigen::VectorXd b = heat_propagator(*basis, 0.7);
  const Eigen::VectorXd c = heat_propagator(*basis, 1.0);
  REQUIRE((a.cwiseProduct(b) - c).cwiseAbs().maxCoeff() <=
          Tolerances::semigroup);
  REQUIRE(a.maxCoeff() <= 1.0);
  REQUIRE(a.minCoeff() > 0.0);

  const SpectralFunction ground = ground_state(normal_form(planar_field(1.0)), 16);
  REQUIRE(heat_propagator(*ground.basis, 1.0)(0) ==
          Approx(std::exp(-1.0)).epsilon(1e-14));

  REQUIRE_THROWS_AS(heat_propagator(*basis, -0.1), validation_error);
}

TEST_CASE("time quadrature reproduces the closed-form Gramian") {
  const FieldMatrix field = planar_field(1.0);
  const BasisPtr basis = build_basis(normal_form(field), 4.0, 3, {}, 24);
  const Eigen::VectorXd energies = mode_energies(*basis);
  const Eigen::MatrixXcd restricted =
      restricted_gram(*basis, periodic_holes(2, 2.0, 0.5));

  for (double horizon : {0.5, 1.0, 2.0}) {
    const Eigen::MatrixXcd gl =
        controllability_gramian(energies, restricted, horizon);
    const Eigen::MatrixXcd exact =
        closed_gramian(energies, restricted, horizon);
    REQUIRE((gl - exact).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((gl - gl.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
    REQUIRE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(gl)
                .eigenvalues()
                .minCoeff() > 0.0);
  }

  REQUIRE_THROWS_AS(controllability_gramian(energies, restricted, 0.0),
                    validation_error);
  REQUIRE_THROWS_AS(controllability_gramian(energies, restricted, 1.0, 1),
                    validation_error);
  REQUIRE_THROWS_AS(
      controllability_gramian(energies.head(2), restricted, 1.0),
      validation_error);
}

TEST_CASE("single-mode full-space control matches the scalar closed form") {
  const SpectralFunction ground = ground_state(normal_form(planar_field(1.0)), 16);
  for (double horizon : {0.5, 1.0, 2.0}) {
    ControlProblem p;
    p.basis = ground.basis;
    p.s = full_space(2);
    p.horizon = horizon;
    p.u0 = Eigen::VectorXcd::Ones(1);
    const ControlResult res = minimal_norm_control(p, 64);
    REQUIRE(res.cost == Approx(scalar_cost(1.0, horizon)).epsilon(1e-10));
    REQUIRE(res.cost_bound == Approx(res.cost).epsilon(1e-10));
    REQUIRE(res.final_norm <= 1e-8);
    REQUIRE(res.final_norm_refined <= 1e-8);
    REQUIRE(res.lambda_min_restricted == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("full-space cost decouples into per-mode scalar costs") {
  const FieldMatrix field = planar_field(1.0);
  const BasisPtr basis = build_basis(normal_form(field), 4.0, 2, {}, 20);
  ControlProblem p;
  p.basis = basis;
  p.s = full_space(2);
  p.horizon = 0.5;
  p.u0 = mixed_u0(basis->size());

  const ControlResult res = minimal_norm_control(p, 256);
  const Eigen::VectorXd energies = mode_energies(*basis);
  double expected = 0.0;
  for (Eigen::Index i = 0; i < energies.size(); ++i)
    expected += std::norm(p.u0(i)) * scalar_cost(energies(i), p.horizon);
  REQUIRE(res.cost == Approx(expected).epsilon(1e-10));
  REQUIRE(res.cost_bound >= res.cost);
  REQUIRE(res.final_norm <= 1e-8 * p.u0.norm());
  REQUIRE(res.final_norm_refined <= 1e-8 * p.u0.norm());
}

TEST_CASE("zero initial data needs zero control") {
  const SpectralFunction ground = ground_state(normal_form(planar_field(1.0)), 16);
  ControlProblem p;
  p.basis = ground.basis;
  p.s = full_space(2);
  p.horizon = 1.0;
  p.u0 = Eigen::VectorXcd::Zero(1);
  const ControlResult res = minimal_norm_control(p);
  REQUIRE(res.cost == 0.0);
  REQUIRE(res.final_norm == 0.0);
  REQUIRE(res.forcing.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cost falls with a longer horizon and a larger set") {
  const FieldMatrix field = planar_field(1.0);
  const BasisPtr basis = build_basis(normal_form(field), 3.0, 4, {}, 24);
  ControlProblem p;
  p.basis = basis;
  p.s = periodic_holes(2, 2.0, 0.5);
  p.u0 = mixed_u0(basis->size());

  double prev = std::numeric_limits<double>::infinity();
  for (double horizon : {0.5, 1.0, 2.0}) {
    p.horizon = horizon;
    const double cost = minimal_norm_control(p, 64).cost;
    REQUIRE(cost <= prev + 1e-12);
    prev = cost;
  }

  p.horizon = 1.0;
  double cost_small_set = 0.0;
  double cost_large_set = 0.0;
  p.s = periodic_holes(2, 2.0, 0.7);
  cost_small_set = minimal_norm_control(p, 64).cost;
  p.s = periodic_holes(2, 2.0, 0.4);
  cost_large_set = minimal_norm_control(p, 64).cost;
  p.s = full_space(2);
  const double cost_full = minimal_norm_control(p, 64).cost;
  REQUIRE(cost_large_set <= cost_small_set + 1e-12);
  REQUIRE(cost_full <= cost_large_set + 1e-12);
}

TEST_CASE("hole-set control steers the state to numerical zero") {
  const FieldMatrix field = planar_field(1.0);
  const double radius = 2.0 * std::sqrt(0.1 / std::numbers::pi);
  ControlProblem p;
  p.basis = build_basis(normal_form(field), 3.0, 6, {}, 24);
  p.s = periodic_holes(2, 2.0, radius);
  p.horizon = 1.0;
  p.u0 = mixed_u0(p.basis->size());

  const ControlResult res = minimal_norm_control(p, 256);
  REQUIRE(res.final_norm <= 1e-8 * p.u0.norm());
  REQUIRE(res.final_norm_refined <= 1e-8 * p.u0.norm());
  REQUIRE(res.cost >= 0.0);
  REQUIRE(res.cost_bound >= res.cost);
  REQUIRE(res.lambda_min_gramian > 1e-12);
  // the forcing at t = T is the basis-projected window of -G^{-1} e^{-TH} u0
  REQUIRE(res.state_norm(0) == Approx(p.u0.norm()).margin(1e-12));
  REQUIRE(res.times(res.times.size() - 1) == Approx(p.horizon));
}

TEST_CASE("free decay is reproduced when the control is switched off") {
  const FieldMatrix field = planar_field(1.0);
  const BasisPtr basis = build_basis(normal_form(field), 4.0, 2, {}, 20);
  ControlProblem p;
  p.basis = basis;
  p.s = full_space(2);
  p.horizon = 1.0;
  p.u0 = mixed_u0(basis->size());
  const Eigen::MatrixXcd id =
      Eigen::MatrixXcd::Identity(basis->size(), basis->size());
  const SimulationResult sim = simulate_control(
      p, id, Eigen::VectorXcd::Zero(basis->size()), 256);
  const Eigen::VectorXd decay = heat_propagator(*basis, p.horizon);
  const Eigen::VectorXcd exact = (decay.array() * p.u0.array()).matrix();
  REQUIRE((sim.trajectory.row(256).transpose() - exact).cwiseAbs().maxCoeff() <
          1e-9);
  REQUIRE(sim.trajectory.row(0).transpose() == p.u0);
  REQUIRE(sim.times(0) == 0.0);
  REQUIRE(sim.final_norm == Approx(exact.norm()).margin(1e-9));
}

TEST_CASE("staged dyadic control sweeps the spectrum window by window") {
  const FieldMatrix field = planar_field(1.0);
  ControlProblem p;
  p.basis = build_basis(normal_form(field), 9.0, 2, {}, 28);
  p.s = periodic_holes(2, 2.0, 0.5);
  p.horizon = 1.0;
  p.u0 = mixed_u0(p.basis->size());

  const StagedControlResult res = staged_control(p, 3, 128);
  REQUIRE(res.stages.size() == 3);
  REQUIRE(res.stages[0].cutoff == Approx(1.0));
  REQUIRE(res.stages[1].cutoff == Approx(4.0));
  REQUIRE(res.stages[2].cutoff == Approx(16.0));
  REQUIRE(res.stages[0].controlled_modes == 3);   // level n=0
  REQUIRE(res.stages[1].controlled_modes == 6);   // levels n<=1
  REQUIRE(res.stages[2].controlled_modes == 15);  // all five levels
  for (const ControlStage& s : res.stages) {
    REQUIRE(s.residual_low <= 1e-6);
    REQUIRE(s.cost >= 0.0);
  }
  REQUIRE(res.stages[0].t_begin == 0.0);
  REQUIRE(res.stages[1].t_begin == Approx(res.stages[0].t_end));
  REQUIRE(res.stages[2].t_begin == Approx(res.stages[1].t_end));
  REQUIRE(res.tail_begin == Approx(1.0 - std::pow(2.0, -3)));
  REQUIRE(res.final_norm <= 1e-6 * p.u0.norm());
  REQUIRE(res.cost >= 0.0);

  REQUIRE_THROWS_AS(staged_control(p, 0), validation_error);
  REQUIRE_THROWS_AS(staged_control(p, 17), validation_error);
}

TEST_CASE("an empty sampling set is rejected as uncontrollable") {
  const FieldMatrix field = planar_field(1.0);
  ControlProblem p;
  p.basis = build_basis(normal_form(field), 4.0, 2, {}, 20);
  p.s = bitmap_set(vec2(-20.0, -20.0), vec2(20.0, 20.0), {4, 4},
                   std::vector<std::uint8_t>(16, 0));
  p.horizon = 1.0;
  p.u0 = mixed_u0(p.basis->size());
  try {
    minimal_norm_control(p);
    FAIL("expected the Gramian floor to reject an empty set");
  } catch (const invariant_error& e) {
    REQUIRE(e.assertion == "control.gramian");
    REQUIRE(std::string(e.what()).find("lambda_min(G_T)") !=
            std::string::npos);
  }
}

TEST_CASE("control problems reject malformed inputs") {
  const SpectralFunction ground = ground_state(normal_form(planar_field(1.0)), 16);
  ControlProblem p;
  p.basis = ground.basis;
  p.s = full_space(2);
  p.horizon = 1.0;
  p.u0 = Eigen::VectorXcd::Ones(1);

  ControlProblem bad = p;
  bad.horizon = 0.0;
  REQUIRE_THROWS_AS(minimal_norm_control(bad), validation_error);
  bad = p;
  bad.u0 = Eigen::VectorXcd::Ones(3);
  REQUIRE_THROWS_AS(minimal_norm_control(bad), validation_error);
  bad = p;
  bad.u0(0) = Cplx(std::nan(""), 0.0);
  REQUIRE_THROWS_AS(minimal_norm_control(bad), validation_error);
  bad = p;
  bad.s = full_space(3);
  REQUIRE_THROWS_AS(minimal_norm_control(bad), validation_error);
  bad = p;
  bad.basis = nullptr;
  REQUIRE_THROWS_AS(minimal_norm_control(bad), validation_error);
  REQUIRE_THROWS_AS(minimal_norm_control(p, 1), validation_error);
}

TEST_CASE("control artifacts serialize norms and stage logs") {
  const SpectralFunction ground = ground_state(normal_form(planar_field(1.0)), 16);
  ControlProblem p;
  p.basis = ground.basis;
  p.s = full_space(2);
  p.horizon = 1.0;
  p.u0 = Eigen::VectorXcd::Ones(1);
  const ControlResult res = minimal_norm_control(p, 32);

  const CsvTable table = state_norm_table(res);
  REQUIRE(table.header == std::vector<std::string>({"t", "state_norm"}));
  REQUIRE(table.rows.size() == 33);
  REQUIRE(table.rows.front().at(0) == "0");

  const nlohmann::json j = to_json(res);
  REQUIRE(j.at("cost").get<double>() ==
          Approx(scalar_cost(1.0, 1.0)).epsilon(1e-10));
  REQUIRE(j.at("samples").get<int>() == 33);
  REQUIRE(j.contains("cost_bound_origin"));

  const nlohmann::json js = to_json(staged_control(p, 2, 32));
  REQUIRE(js.at("stages").size() == 2);
  REQUIRE(js.at("final_norm").get<double>() >= 0.0);
}
