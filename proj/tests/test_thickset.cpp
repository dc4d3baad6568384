#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "maglab/io.hpp"
#include "maglab/thickset.hpp"

using namespace maglab;
using Catch::Approx;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

}  // namespace

// ---- serialization helpers ---------------------------------------------------

TEST_CASE("base64 round trips across all padding classes") {
  std::mt19937_64 rng(7);
  for (int len = 0; len <= 24; ++len) {
    std::vector<std::uint8_t> data(len);
    for (auto& b : data) b = std::uint8_t(rng());
    const std::string text = base64_encode(data);
    REQUIRE(text.size() % 4 == 0);
    REQUIRE(base64_decode(text) == data);
  }
  REQUIRE(base64_encode({0x4d, 0x61, 0x6e}) == "TWFu");
  REQUIRE(base64_encode({0x4d}) == "TQ==");
  REQUIRE(base64_encode({}) == "");

  REQUIRE_THROWS_AS(base64_decode("TQ="), validation_error);   // bad length
  REQUIRE_THROWS_AS(base64_decode("T!=="), validation_error);  // bad symbol
}

TEST_CASE("number formatting round trips and refuses non-finite values") {
  REQUIRE(format_number(0.25) == "0.25");
  REQUIRE(format_number(-0.0) == "-0");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double x = std::ldexp(u(rng), int(rng() % 600) - 300);
    REQUIRE(std::strtod(format_number(x).c_str(), nullptr) == x);
  }
  REQUIRE_THROWS_AS(format_number(std::nan("")), invariant_error);
  REQUIRE_THROWS_AS(format_number(HUGE_VAL), invariant_error);
}

TEST_CASE("csv tables enforce width and the simple dialect") {
  CsvTable t;
  t.header = {"a", "b"};
  t.add_row({"1", "2"});
  REQUIRE(t.to_string() == "a,b\n1,2\n");
  REQUIRE_THROWS_AS(t.add_row({"only-one"}), invariant_error);
  t.add_row({"x,y", "3"});
  REQUIRE_THROWS_AS(t.to_string(), invariant_error);
}

TEST_CASE("fnv1a matches the published 64-bit vectors") {
  REQUIRE(fnv1a("") == 0xcbf29ce484222325ULL);
  REQUIRE(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  REQUIRE(fnv1a("foobar") == 0x85944171f73967e8ULL);
  REQUIRE(fnv1a_hex("") == "cbf29ce484222325");
  REQUIRE(fnv1a_hex("foobar") == "85944171f73967e8");
}

// ---- membership --------------------------------------------------------------

TEST_CASE("hole lattice membership excludes open balls around lattice points") {
  const SamplingSet s = periodic_holes(2, 2.0, 0.5);
  REQUIRE_FALSE(contains(s, vec2(0.0, 0.0)));
  REQUIRE(contains(s, vec2(1.0, 1.0)));
  REQUIRE(contains(s, vec2(0.5, 0.0)));        // boundary belongs to the set
  REQUIRE_FALSE(contains(s, vec2(0.49, 0.0)));
  REQUIRE_FALSE(contains(s, vec2(2.0, -4.0)));  // lattice point far away
  REQUIRE_FALSE(contains(s, vec2(-1.9, 6.1)));  // near (-2, 6)

  const SamplingSet s3 = periodic_holes(3, 2.0, 0.5);
  REQUIRE(contains(s3, vec3(1.0, 1.0, 1.0)));
  REQUIRE_FALSE(contains(s3, vec3(0.2, 0.2, 0.2)));

  Eigen::MatrixXd pts(3, 2);
  pts << 0, 0, 1, 1, 0.5, 0;
  REQUIRE(indicator(s, pts) == std::vector<std::uint8_t>({0, 1, 1}));
}

TEST_CASE("hole lattice membership is exactly periodic for binary periods") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (double period : {2.0, 0.5}) {
    const SamplingSet s = periodic_holes(2, period, 0.2 * period);
    for (int i = 0; i < 300; ++i) {
      const Eigen::VectorXd x = vec2(u(rng), u(rng));
      const bool at = contains(s, x);
      REQUIRE(contains(s, x + vec2(period, 0.0)) == at);
      REQUIRE(contains(s, x - vec2(0.0, 3 * period)) == at);
    }
  }
}

TEST_CASE("stripe membership depends on one coordinate modulo the period") {
  const SamplingSet s = stripes(2, 1.0, 0.3, 0);
  REQUIRE(contains(s, vec2(0.1, 5.0)));
  REQUIRE_FALSE(contains(s, vec2(0.31, 0.0)));
  REQUIRE_FALSE(contains(s, vec2(0.3, 0.0)));  // half-open stripe
  REQUIRE(contains(s, vec2(1.05, -2.0)));
  REQUIRE(contains(s, vec2(-0.9, 0.0)));   // wraps to 0.1
  REQUIRE(contains(s, vec2(0.0, 0.35)));   // other axes never matter
}

TEST_CASE("bitmap membership reads voxels row-major and clips to the box") {
  const SamplingSet s = bitmap_set(vec2(0.0, 0.0), vec2(1.0, 1.0), {2, 2},
                                   {1, 0, 0, 1});
  REQUIRE(contains(s, vec2(0.25, 0.25)));        // voxel (0,0)
  REQUIRE_FALSE(contains(s, vec2(0.25, 0.75)));  // voxel (0,1)
  REQUIRE_FALSE(contains(s, vec2(0.75, 0.25)));  // voxel (1,0)
  REQUIRE(contains(s, vec2(0.75, 0.75)));        // voxel (1,1)
  REQUIRE_FALSE(contains(s, vec2(1.5, 0.5)));    // outside the box
  REQUIRE_FALSE(contains(s, vec2(1.0, 1.0)));    // upper edge excluded
  REQUIRE(contains(s, vec2(0.0, 0.0)));          // lower edge included
}

TEST_CASE("full space contains everything and bad constructions are rejected") {
  const SamplingSet s = full_space(3);
  REQUIRE(contains(s, vec3(1e9, -1e9, 0.0)));
  REQUIRE_THROWS_AS(contains(s, vec2(0.0, 0.0)), validation_error);

  REQUIRE_THROWS_AS(full_space(0), validation_error);
  REQUIRE_THROWS_AS(periodic_holes(2, 1.0, 0.5), validation_error);  // L = 2r
  REQUIRE_THROWS_AS(periodic_holes(2, 2.0, 0.0), validation_error);
  REQUIRE_THROWS_AS(stripes(2, 1.0, 1.0, 0), validation_error);
  REQUIRE_THROWS_AS(stripes(2, 1.0, 0.5, 2), validation_error);
  REQUIRE_THROWS_AS(
      bitmap_set(vec2(0, 0), vec2(1, 1), {2, 2}, {1, 0, 1}),
      validation_error);  // bit count mismatch
  REQUIRE_THROWS_AS(
      bitmap_set(vec2(0, 0), vec2(0, 1), {2, 2}, {1, 0, 1, 0}),
      validation_error);  // empty box extent
}

// ---- densities ----------------------------------------------------------------

TEST_CASE("hole lattice density matches the closed form") {
  REQUIRE(unit_ball_volume(1) == Approx(2.0).epsilon(1e-14));
  REQUIRE(unit_ball_volume(2) == Approx(std::numbers::pi).epsilon(1e-14));
  REQUIRE(unit_ball_volume(3) ==
          Approx(4.0 * std::numbers::pi / 3.0).epsilon(1e-14));

  const auto [s2, rho2] = hole_set(2.0, 0.5, 2);
  REQUIRE(s2.kind == SetKind::periodic_holes);
  REQUIRE(rho2 == Approx(1.0 - std::numbers::pi / 16.0).margin(1e-15));
  REQUIRE(rho2 == Approx(0.8036504592).margin(1e-9));

  const auto [s3, rho3] = hole_set(2.0, 0.5, 3);
  REQUIRE(rho3 == Approx(1.0 - std::numbers::pi / 48.0).margin(1e-15));
  REQUIRE(rho3 == Approx(0.9345501531).margin(1e-9));

  const auto [stiny, rho_tiny] = hole_set(2.0, 1e-6, 2);
  REQUIRE(rho_tiny == Approx(1.0).margin(1e-12));
}

TEST_CASE("thickness certificates: full space and period-sized windows") {
  const ThicknessCertificate full =
      thickness_estimate(full_space(2), vec2(1.0, 1.0), 16);
  REQUIRE(full.rho_lower == 1.0);
  REQUIRE(full.method == "exact");
  REQUIRE(full.discretization == 0.0);

  const auto [s, rho] = hole_set(2.0, 0.5, 2);
  const ThicknessCertificate c = thickness_estimate(s, vec2(2.0, 2.0), 128);
  REQUIRE(c.method == "exhaustive-by-periodicity");
  REQUIRE(c.rho_lower >= 0.0);
  REQUIRE(c.rho_lower <= 1.0);
  REQUIRE(std::abs(c.rho_lower - rho) <= c.discretization);
  REQUIRE(c.discretization < 0.1);
}

TEST_CASE("a window that fits inside a hole certifies zero thickness") {
  const SamplingSet s = hole_set(2.0, 0.5, 2).first;
  const ThicknessCertificate c = thickness_estimate(s, vec2(0.4, 0.4), 100);
  REQUIRE(c.rho_lower == 0.0);

  // the reported worst translate reproduces the empty window
  const double h = 2.0 / 100;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      const Eigen::VectorXd mid =
          c.worst_translate + vec2((i + 0.5) * h, (j + 0.5) * h);
      REQUIRE_FALSE(contains(s, mid));
    }
  REQUIRE(c.worst_translate.minCoeff() >= 0.0);
  REQUIRE(c.worst_translate.maxCoeff() < 2.0);
}

TEST_CASE("periodic estimates agree with the closed form across shapes") {
  const std::vector<std::pair<double, double>> cases = {
      {2.0, 0.5}, {2.0, 0.9}, {1.0, 0.25}, {3.0, 0.6}, {0.8, 0.3}};
  for (const auto& [period, radius] : cases) {
    {
      const auto [s, rho] = hole_set(period, radius, 2);
      const Eigen::VectorXd l = Eigen::VectorXd::Constant(2, period);
      const ThicknessCertificate c = thickness_estimate(s, l, 96);
      INFO("d=2 period=" << period << " radius=" << radius);
      REQUIRE(std::abs(c.rho_lower - rho) <= c.discretization);
    }
    {
      const auto [s, rho] = hole_set(period, radius, 3);
      const Eigen::VectorXd l = Eigen::VectorXd::Constant(3, period);
      const ThicknessCertificate c = thickness_estimate(s, l, 32);
      INFO("d=3 period=" << period << " radius=" << radius);
      REQUIRE(std::abs(c.rho_lower - rho) <= c.discretization);
    }
  }
}

TEST_CASE("thickness is nonincreasing in the hole radius") {
  double prev = 2.0;
  for (double radius : {0.2, 0.4, 0.6, 0.8, 0.95}) {
    const SamplingSet s = periodic_holes(2, 2.0, radius);
    const double rho =
        thickness_estimate(s, vec2(1.5, 1.5), 64).rho_lower;
    REQUIRE(rho <= prev);
    prev = rho;
  }
}

TEST_CASE("stripe certificates hit the exact fractions") {
  const SamplingSet s = stripes(2, 1.0, 0.5, 0);
  const ThicknessCertificate period_window =
      thickness_estimate(s, vec2(1.0, 1.0), 100);
  REQUIRE(period_window.rho_lower == Approx(0.5).margin(1e-15));
  REQUIRE(period_window.method == "exhaustive-by-periodicity");

  // a window narrower than the gap can sit entirely between stripes
  const ThicknessCertificate narrow =
      thickness_estimate(s, vec2(0.25, 7.0), 100);
  REQUIRE(narrow.rho_lower == 0.0);
  REQUIRE(narrow.worst_translate(1) == 0.0);  // only axis 0 is scanned
  const double t0 = narrow.worst_translate(0);
  REQUIRE(t0 >= 0.5);  // the gap is [0.5, 1)
  REQUIRE(t0 + 0.25 <= 1.0 + 1e-12);
}

TEST_CASE("bitmap certificates scan every in-box translate") {
  std::vector<std::uint8_t> bits(16, 1);
  bits[2 * 4 + 1] = 0;  // voxel (2, 1)
  const SamplingSet s =
      bitmap_set(vec2(0, 0), vec2(4, 4), {4, 4}, bits);

  const ThicknessCertificate single =
      thickness_estimate(s, vec2(1.0, 1.0), 10);
  REQUIRE(single.method == "exhaustive-in-box");
  REQUIRE(single.rho_lower == 0.0);
  REQUIRE(single.worst_translate(0) == Approx(2.0).margin(1e-12));
  REQUIRE(single.worst_translate(1) == Approx(1.0).margin(1e-12));

  const ThicknessCertificate whole =
      thickness_estimate(s, vec2(4.0, 4.0), 10);
  REQUIRE(whole.rho_lower == Approx(15.0 / 16.0).margin(1e-15));
  REQUIRE(whole.worst_translate.isZero(0.0));

  REQUIRE_THROWS_AS(thickness_estimate(s, vec2(5.0, 1.0), 10),
                    validation_error);  // rectangle exceeds the box
}

TEST_CASE("thickness estimate rejects malformed requests") {
  const SamplingSet s = periodic_holes(2, 2.0, 0.5);
  REQUIRE_THROWS_AS(thickness_estimate(s, vec3(1, 1, 1), 16),
                    validation_error);
  REQUIRE_THROWS_AS(thickness_estimate(s, vec2(1.0, -1.0), 16),
                    validation_error);
  REQUIRE_THROWS_AS(thickness_estimate(s, vec2(1.0, 1.0), 1),
                    validation_error);
}

// ---- serialization of sets -----------------------------------------------------

TEST_CASE("sampling sets round trip through tagged json") {
  {
    const SamplingSet s = full_space(4);
    const SamplingSet back = set_from_json(to_json(s));
    REQUIRE(back.kind == SetKind::full_space);
    REQUIRE(back.d == 4);
  }
  {
    const SamplingSet back =
        set_from_json(to_json(periodic_holes(3, 2.5, 0.75)));
    REQUIRE(back.kind == SetKind::periodic_holes);
    REQUIRE(back.hole_period == 2.5);
    REQUIRE(back.hole_radius == 0.75);
  }
  {
    const SamplingSet back = set_from_json(to_json(stripes(2, 1.5, 0.4, 1)));
    REQUIRE(back.kind == SetKind::stripes);
    REQUIRE(back.stripe_period == 1.5);
    REQUIRE(back.stripe_width == 0.4);
    REQUIRE(back.stripe_axis == 1);
  }
  {
    std::mt19937_64 rng(41);
    std::vector<std::uint8_t> bits(37);  // odd length exercises padding
    for (auto& b : bits) b = rng() & 1u;
    const SamplingSet s = bitmap_set(vec2(-1, 0), vec2(1, 3), {37, 1}, bits);
    const nlohmann::json j = to_json(s);
    REQUIRE(j.at("variant") == "bitmap");
    const SamplingSet back = set_from_json(j);
    REQUIRE(back.bits == bits);
    REQUIRE(back.resolution == std::vector<int>({37, 1}));
    REQUIRE(back.box_lo(0) == -1.0);
    REQUIRE(back.box_hi(1) == 3.0);
  }
  REQUIRE_THROWS_AS(set_from_json({{"variant", "wedge"}, {"d", 2}}),
                    validation_error);
}

TEST_CASE("thickness certificates serialize their full content") {
  const SamplingSet s = hole_set(2.0, 0.5, 2).first;
  const nlohmann::json j = to_json(thickness_estimate(s, vec2(2.0, 2.0), 32));
  REQUIRE(j.at("l").size() == 2);
  REQUIRE(j.at("rho_lower").get<double>() >= 0.0);
  REQUIRE(j.at("method") == "exhaustive-by-periodicity");
  REQUIRE(j.at("worst_translate").size() == 2);
  REQUIRE(j.at("discretization").get<double>() > 0.0);
}
