#pragma once

// Command-line driver: twelve subcommands sharing one config schema, one
// artifact writer, and one manifest format.  Exit codes: 0 all run-time
// assertions pass, 1 an invariant failed (assertion id printed), 2 the
// config did not validate (field path printed).
//
// Central defaults (every optional knob, in one place):
//   basis.nodes        32    grid nodes per axis (schema default)
//   m_max              4     derivative order cap for good-bad
//   resolution         64    thickness-scan cells per axis (observability)
//   radial / angular   32/64 ball-quadrature orders for restricted Grams
//   n_time             64    Gramian quadrature nodes = simulation samples
//   nodes              24    per-axis nodes in optimality-scan
//   nodes              32    per-axis nodes in necessity
//   companion          true  independent truncation diagnostic
//   variant            base  bound-exponent shape (quarter-root,
//                            energy-controlled selectable)
//   c_d                d     one-norm vs operator-norm conversion factor
//   --jobs             1     concurrent scenario evaluations (per-seed loops)

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "maglab/config.hpp"
#include "maglab/eigenbasis.hpp"
#include "maglab/errors.hpp"
#include "maglab/field.hpp"
#include "maglab/heatcontrol.hpp"
#include "maglab/io.hpp"
#include "maglab/magderiv.hpp"
#include "maglab/observability.hpp"
#include "maglab/thickset.hpp"

namespace maglab {

inline constexpr const char* kLibraryVersion = "1.0.0";

// ---- Artifacts -------------------------------------------------------------------

// Collects named files in memory and writes them in one pass; contents are
// deterministic (sorted keys, fixed float formatting), so identical runs
// produce byte-identical artifacts.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::string dir) : dir_(std::move(dir)) {}

  void add_json(const std::string& name, const nlohmann::json& j) {
    files_[name] = j.dump(2) + "\n";
  }

  void add_csv(const std::string& name, const CsvTable& table) {
    files_[name] = table.to_string();
  }

  const std::map<std::string, std::string>& files() const { return files_; }

  void flush() const {
    std::filesystem::create_directories(dir_);
    for (const auto& [name, content] : files_) {
      std::ofstream out(std::filesystem::path(dir_) / name,
                        std::ios::binary | std::ios::trunc);
      out << content;
      if (!out)
        throw invariant_error("io.write", "failed writing artifact " + name);
    }
  }

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::map<std::string, std::string> files_;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw validation_error("config.path", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string iso8601_utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(' ');
    out += std::to_string(v[i]);
  }
  return out;
}

// Side-length vector: a scalar replicates across all d axes.
inline Eigen::VectorXd sides_from_json(const nlohmann::json& j,
                                       const std::string& path, int d) {
  if (j.is_number()) {
    const double v = get_positive(j, path);
    return Eigen::VectorXd::Constant(d, v);
  }
  const Eigen::VectorXd l = vector_from_json(j, path);
  if (l.size() != d)
    throw validation_error(path, "need one side length per dimension");
  for (int a = 0; a < d; ++a)
    if (!(l(a) > 0.0))
      throw validation_error(path, "sides must be positive");
  return l;
}

inline void require(bool ok, const std::string& assertion,
                    const std::string& message) {
  if (!ok) throw invariant_error(assertion, message);
}

// Index-ordered map with at most `jobs` concurrent evaluations; results are
// collected in input order, so parallelism never changes the output.
template <typename Fn>
auto parallel_map(int jobs, int count, Fn&& fn) {
  using R = std::invoke_result_t<Fn&, int>;
  std::vector<R> out;
  out.reserve(static_cast<std::size_t>(count));
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) out.push_back(fn(i));
    return out;
  }
  for (int base = 0; base < count; base += jobs) {
    const int batch = std::min(jobs, count - base);
    std::vector<std::future<R>> futs;
    futs.reserve(static_cast<std::size_t>(batch));
    for (int k = 0; k < batch; ++k)
      futs.push_back(std::async(std::launch::async, fn, base + k));
    for (auto& f : futs) out.push_back(f.get());
  }
  return out;
}

inline BoundVariant variant_from_string(const std::string& s,
                                        const std::string& path) {
  if (s == "base") return BoundVariant::base;
  if (s == "quarter-root") return BoundVariant::quarter_root;
  if (s == "energy-controlled") return BoundVariant::energy_controlled;
  throw validation_error(path, "unknown variant '" + s + "'");
}

}  // namespace detail

struct RunContext {
  ExperimentConfig cfg;
  int jobs = 1;
  ArtifactWriter* artifacts = nullptr;

  const nlohmann::json& raw() const { return cfg.raw; }
  const Tolerances& tol() const { return cfg.tolerances; }
  std::uint64_t seed() const { return cfg.seed.value(); }
};

namespace detail {

inline FieldMatrix field_of(const RunContext& rc) {
  return field_spec_from_json(rc.raw().at("field"), "config.field");
}

inline BasisPtr basis_of(const RunContext& rc, const FieldMatrix& field) {
  const BasisSpec spec =
      basis_spec_from_json(rc.raw().at("basis"), "config.basis");
  return build_basis(normal_form(field), spec.energy, spec.l_max,
                     spec.null_spec, spec.nodes, spec.sigma_null, rc.tol());
}

// ---- decompose -------------------------------------------------------------------

inline void run_decompose(const RunContext& rc) {
  const FieldMatrix field = field_of(rc);
  const BlockNormalForm nf = normal_form(field);
  const FieldNorms norms = field_norms(field, nf);
  nlohmann::json out;
  out["field"] = to_json(field);
  out["normal_form"] = to_json(nf);
  out["frequencies"] = nf.frequencies;  // duplicated at top level for greppability
  out["norms"] = {{"frobenius_sq", norms.frobenius_sq},
                  {"one_norm_bsq", norms.one_norm_bsq},
                  {"op_norm", norms.op_norm}};
  rc.artifacts->add_json("decompose.json", out);
}

// ---- spectrum --------------------------------------------------------------------

inline void run_spectrum(const RunContext& rc) {
  const FieldMatrix field = field_of(rc);
  const double energy = get_positive(rc.raw().at("energy"), "config.energy");
  const BlockNormalForm nf = normal_form(field);
  const std::vector<LevelEntry> levels = enumerate_levels(nf, energy);

  nlohmann::json out;
  out["field"] = to_json(field);
  out["energy"] = energy;
  out["bottom"] = spectrum_bottom(nf);
  out["levels"] = nlohmann::json::array();
  CsvTable table;
  table.header = {"energy", "band"};
  for (int j = 0; j < nf.block_count(); ++j)
    table.header.push_back("n_" + std::to_string(j));
  for (const LevelEntry& lv : levels) {
    out["levels"].push_back({{"energy", lv.base_energy},
                             {"n", lv.n},
                             {"band", lv.band}});
    std::vector<std::string> row = {format_number(lv.base_energy),
                                    lv.band ? "1" : "0"};
    for (int n : lv.n) row.push_back(std::to_string(n));
    table.add_row(std::move(row));
  }
  rc.artifacts->add_json("spectrum.json", out);
  rc.artifacts->add_csv("spectrum.csv", table);
}

// ---- basis-check -----------------------------------------------------------------

inline void run_basis_check(const RunContext& rc) {
  const FieldMatrix field = field_of(rc);
  const BasisPtr basis = basis_of(rc, field);
  const LandauContext& ctx = basis->ctx;
  const Eigen::VectorXd w = ctx.grid.weights();

  const Eigen::MatrixXcd gram =
      basis->values.adjoint() * (w.asDiagonal() * basis->values);
  const double orth =
      (gram - Eigen::MatrixXcd::Identity(basis->size(), basis->size()))
          .cwiseAbs()
          .maxCoeff();

  CsvTable table;
  table.header = {"index", "energy",  "n",       "l",
                  "xi_norm", "leakage", "residual"};
  double max_residual = 0.0;
  double max_leakage = 0.0;
  for (int i = 0; i < basis->size(); ++i) {
    const LandauMode& mode = basis->modes[i];
    const CVec v = basis->values.col(i);
    const CVec hv = apply_h(ctx, v);
    const double base = std::sqrt(ctx.grid.norm_sq(v));
    const double residual =
        std::sqrt(ctx.grid.norm_sq(hv - mode.energy * v)) / base;
    max_residual = std::max(max_residual, residual);
    max_leakage = std::max(max_leakage, basis->leakage[i]);
    table.add_row({std::to_string(i), format_number(mode.energy),
                   join_ints(mode.n), join_ints(mode.l),
                   format_number(mode.xi.norm()),
                   format_number(basis->leakage[i]),
                   format_number(residual)});
  }

  nlohmann::json out;
  out["size"] = basis->size();
  out["excluded"] = basis->excluded;
  out["cutoff"] = basis->cutoff;
  out["l_max"] = basis->l_max;
  out["orthogonality"] = orth;
  out["max_residual"] = max_residual;
  out["max_leakage"] = max_leakage;
  rc.artifacts->add_json("basis.json", out);
  rc.artifacts->add_csv("modes.csv", table);

  require(orth <= rc.tol().eta_orth, "cli.orthogonality",
          "basis Gram deviates from identity by " + format_number(orth));
  require(max_residual <= rc.tol().eta_eig, "cli.residual",
          "worst eigen-residual " + format_number(max_residual));
  require(max_leakage <= rc.tol().eta_leak, "cli.leakage",
          "worst spectral leakage " + format_number(max_leakage));
}

// ---- bernstein -------------------------------------------------------------------

inline void run_bernstein(const RunContext& rc) {
  const FieldMatrix field = field_of(rc);
  const BasisSpec spec =
      basis_spec_from_json(rc.raw().at("basis"), "config.basis");
  const BasisPtr basis = basis_of(rc, field);
  const int m_max = get_int(rc.raw().at("m_max"), "config.m_max");
  if (m_max < 0 || m_max > 6)
    throw validation_error("config.m_max", "supported orders are 0..6");
  const int seeds = get_int(rc.raw().at("seeds"), "config.seeds");
  if (seeds < 1)
    throw validation_error("config.seeds", "need at least one seed");
  const int m_classical = std::min(3, m_max);

  struct PerSeed {
    std::vector<BernsteinReport> rows;
    std::vector<ClassicalReport> classical;
  };
  const std::vector<PerSeed> runs =
      parallel_map(rc.jobs, seeds, [&](int s) {
        const CVec v = grid_values(
            random_subspace_function(basis, rc.seed() + std::uint64_t(s)));
        PerSeed out;
        out.rows = bernstein_report(basis->ctx, v, m_max, spec.energy);
        for (int m = 0; m <= m_classical; ++m)
          out.classical.push_back(
              classical_derivative_l1(basis->ctx, v, m, spec.energy));
        return out;
      });

  CsvTable table, classical;
  table.header = {"seed", "m", "lhs", "bound", "ratio"};
  classical.header = {"seed", "m", "sum_l1", "bound", "ratio"};
  double max_ratio = 0.0, max_classical = 0.0;
  for (int s = 0; s < seeds; ++s) {
    for (const BernsteinReport& r : runs[s].rows) {
      max_ratio = std::max(max_ratio, r.ratio);
      table.add_row({std::to_string(s), std::to_string(r.m),
                     format_number(r.lhs), format_number(r.bound),
                     format_number(r.ratio)});
    }
    for (const ClassicalReport& r : runs[s].classical) {
      max_classical = std::max(max_classical, r.ratio);
      classical.add_row({std::to_string(s), std::to_string(r.m),
                         format_number(r.sum_l1), format_number(r.bound),
                         format_number(r.ratio)});
    }
  }

  nlohmann::json out;
  out["seeds"] = seeds;
  out["m_max"] = m_max;
  out["energy"] = spec.energy;
  out["max_ratio"] = max_ratio;
  out["max_classical_ratio"] = max_classical;
  rc.artifacts->add_json("bernstein.json", out);
  rc.artifacts->add_csv("bernstein.csv", table);
  rc.artifacts->add_csv("classical.csv", classical);

  const double cap = 1.0 + rc.tol().eta_bern;
  require(max_ratio <= cap, "cli.bernstein",
          "derivative-sum ratio " + format_number(max_ratio) + " > " +
              format_number(cap));
  require(max_classical <= cap, "cli.classical",
          "classical L1 ratio " + format_number(max_classical) + " > " +
              format_number(cap));
}

// ---- recursion -------------------------------------------------------------------

inline void run_recursion(const RunContext& rc) {
  const FieldMatrix field = field_of(rc);
  const BasisPtr basis = basis_of(rc, field);
  const int m_max = get_int(rc.raw().at("m_max"), "config.m_max");
  if (m_max < 1 || m_max > 6)
    throw validation_error("config.m_max", "supported orders are 1..6");
  const int seeds = get_int(rc.raw().at("seeds"), "config.seeds");
  if (seeds < 1)
    throw validation_error("config.seeds", "need at least one seed");

  const std::vector<RecursionReport> runs =
      parallel_map(rc.jobs, seeds, [&](int s) {
        const CVec v = grid_values(
            random_subspace_function(basis, rc.seed() + std::uint64_t(s)));
        return verify_recursion(basis->ctx, v, m_max);
      });

  CsvTable table;
  table.header = {"seed",       "m",
                  "q_x",        "q_y",
                  "x_residual", "y_residual",
                  "two_branch", "two_branch_tight",
                  "product",    "product_loose"};
  double max_route = 0.0, max_identity = 0.0;
  double max_branch = 0.0, max_product = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const RecursionReport& r = runs[s];
    max_identity = std::max(
        {max_identity, r.x0_vs_energy, std::abs(r.y0_identity_ratio - 1.0)});
    for (int m = 1; m <= m_max; ++m) {
      max_route = std::max(
          {max_route, r.x_route_residual[m - 1], r.y_route_residual[m - 1]});
      max_branch = std::max({max_branch, r.two_branch_ratio[m - 1],
                             r.two_branch_ratio_tight[m - 1]});
      max_product = std::max({max_product, r.product_ratio[m - 1],
                              r.product_ratio_loose[m - 1]});
      table.add_row({std::to_string(s), std::to_string(m),
                     format_number(r.q_x[m]), format_number(r.q_y[m]),
                     format_number(r.x_route_residual[m - 1]),
                     format_number(r.y_route_residual[m - 1]),
                     format_number(r.two_branch_ratio[m - 1]),
                     format_number(r.two_branch_ratio_tight[m - 1]),
                     format_number(r.product_ratio[m - 1]),
                     format_number(r.product_ratio_loose[m - 1])});
    }
  }

  nlohmann::json out;
  out["seeds"] = seeds;
  out["m_max"] = m_max;
  out["max_identity_error"] = max_identity;
  out["max_route_residual"] = max_route;
  out["max_two_branch_ratio"] = max_branch;
  out["max_product_ratio"] = max_product;
  rc.artifacts->add_json("recursion.json", out);
  rc.artifacts->add_csv("recursion.csv", table);

  require(max_identity <= Tolerances::dual_route, "cli.recursion.identity",
          "order-zero identities drift by " + format_number(max_identity));
  require(max_route <= Tolerances::dual_route, "cli.recursion.route",
          "recursion route residual " + format_number(max_route));
  const double cap = 1.0 + rc.tol().eta_bern;
  require(max_branch <= cap, "cli.recursion.bound",
          "two-branch spectral ratio " + format_number(max_branch));
  require(max_product <= cap, "cli.recursion.product",
          "product-form ratio " + format_number(max_product));
}

// ---- good-bad --------------------------------------------------------------------

inline void run_good_bad(const RunContext& rc) {
  const FieldMatrix field = field_of(rc);
  const int d = static_cast<int>(field.b.rows());
  const BasisSpec spec =
      basis_spec_from_json(rc.raw().at("basis"), "config.basis");
  const Eigen::VectorXd l = sides_from_json(rc.raw().at("l"), "config.l", d);
  int m_max = 4;
  if (rc.raw().contains("m_max"))
    m_max = get_int(rc.raw().at("m_max"), "config.m_max");
  const bool use_ground =
      rc.raw().contains("ground") &&
      get_bool(rc.raw().at("ground"), "config.ground");
  int n_random = 0;
  if (rc.raw().contains("random")) {
    n_random = get_int(rc.raw().at("random"), "config.random");
    if (n_random < 0)
      throw validation_error("config.random", "must be >= 0");
  }
  if (!use_ground && n_random == 0)
    throw validation_error(
        "config.ground", "need ground = true or random > 0 to have a run");

  struct Labeled {
    std::string label;
    GoodBadReport report;
  };
  std::vector<Labeled> runs;
  if (use_ground) {
    const SpectralFunction psi =
        ground_state(normal_form(field), spec.nodes, spec.sigma_null,
                     rc.tol());
    runs.push_back({"ground", good_bad_partition(psi, l, m_max)});
  }
  if (n_random > 0) {
    const BasisPtr basis = basis_of(rc, field);
    std::vector<Labeled> sampled =
        parallel_map(rc.jobs, n_random, [&](int i) {
          const SpectralFunction f = random_subspace_function(
              basis, rc.seed() + std::uint64_t(i));
          return Labeled{"random" + std::to_string(i),
                         good_bad_partition(f, l, m_max)};
        });
    for (Labeled& r : sampled) runs.push_back(std::move(r));
  }

  CsvTable table;
  table.header = {"function", "cell", "mass", "good", "flagged",
                  "worst_ratio"};
  nlohmann::json out;
  out["l"] = std::vector<double>(l.data(), l.data() + l.size());
  out["m_max"] = m_max;
  out["runs"] = nlohmann::json::array();
  bool all_ok = true;
  for (const Labeled& r : runs) {
    out["runs"].push_back(to_json(r.report));
    out["runs"].back()["label"] = r.label;
    all_ok = all_ok && r.report.half_mass_ok;
    for (const RectangleLabel& cell : r.report.cells)
      table.add_row({r.label, join_ints(cell.index),
                     format_number(cell.mass), cell.good ? "1" : "0",
                     cell.flagged ? "1" : "0",
                     format_number(cell.worst_ratio)});
  }
  rc.artifacts->add_json("good_bad.json", out);
  rc.artifacts->add_csv("cells.csv", table);

  require(all_ok, "cli.good_bad",
          "a run kept less than half of its mass on good cells");
}

// ---- remez -----------------------------------------------------------------------

inline void run_remez(const RunContext& rc) {
  const int degree = get_int(rc.raw().at("degree"), "config.degree");
  const double measure =
      get_positive(rc.raw().at("measure"), "config.measure");
  const int trials = get_int(rc.raw().at("trials"), "config.trials");
  const RemezReport report =
      remez_1d_check(degree, measure, trials, rc.seed());
  rc.artifacts->add_json("remez.json", to_json(report));
  require(report.violations == 0, "cli.remez",
          std::to_string(report.violations) +
              " trials broke the propagation bound (worst ratio " +
              format_number(report.max_ratio) + ")");
}

// ---- thickness -------------------------------------------------------------------

inline void run_thickness(const RunContext& rc) {
  const SamplingSet s = set_spec_from_json(rc.raw().at("set"), "config.set");
  const Eigen::VectorXd l =
      sides_from_json(rc.raw().at("l"), "config.l", s.d);
  const int resolution =
      get_int(rc.raw().at("resolution"), "config.resolution");
  const ThicknessCertificate cert = thickness_estimate(s, l, resolution);

  nlohmann::json out;
  out["set"] = to_json(s);
  out["resolution"] = resolution;
  out["certificate"] = to_json(cert);
  rc.artifacts->add_json("thickness.json", out);

  CsvTable table;
  table.header = {"rho_lower", "method", "discretization"};
  for (int a = 0; a < s.d; ++a)
    table.header.push_back("l_" + std::to_string(a));
  for (int a = 0; a < s.d; ++a)
    table.header.push_back("worst_" + std::to_string(a));
  std::vector<std::string> row = {format_number(cert.rho_lower), cert.method,
                                  format_number(cert.discretization)};
  for (int a = 0; a < s.d; ++a) row.push_back(format_number(cert.l(a)));
  for (int a = 0; a < s.d; ++a)
    row.push_back(format_number(cert.worst_translate(a)));
  table.add_row(std::move(row));
  rc.artifacts->add_csv("thickness.csv", table);
}

// ---- observability ---------------------------------------------------------------

inline void run_observability(const RunContext& rc) {
  const FieldMatrix field = field_of(rc);
  const int d = static_cast<int>(field.b.rows());
  const BasisSpec spec =
      basis_spec_from_json(rc.raw().at("basis"), "config.basis");
  const SamplingSet s = set_spec_from_json(rc.raw().at("set"), "config.set");
  if (s.d != d)
    throw validation_error("config.set.d", "set dimension differs from field");

  bool companion = true;
  if (rc.raw().contains("companion"))
    companion = get_bool(rc.raw().at("companion"), "config.companion");
  if (!companion && rc.raw().contains("max_truncation_delta"))
    throw validation_error("config.max_truncation_delta",
                           "requires companion = true");
  int radial = 32, angular = 64;
  if (rc.raw().contains("radial"))
    radial = get_int(rc.raw().at("radial"), "config.radial");
  if (rc.raw().contains("angular"))
    angular = get_int(rc.raw().at("angular"), "config.angular");

  const BasisPtr basis = basis_of(rc, field);
  const ObservabilityResult result = observability_constant(
      basis, s, rc.tol(), companion, radial, angular);

  nlohmann::json out;
  out["set"] = to_json(s);
  out["result"] = to_json(result);

  bool have_bound = false;
  TheoremBound bound;
  if (rc.raw().contains("l")) {
    const Eigen::VectorXd l =
        sides_from_json(rc.raw().at("l"), "config.l", d);
    int resolution = 64;
    if (rc.raw().contains("resolution"))
      resolution = get_int(rc.raw().at("resolution"), "config.resolution");
    const ThicknessCertificate cert = thickness_estimate(s, l, resolution);
    out["certificate"] = to_json(cert);
    if (cert.rho_lower > 0.0) {
      BoundVariant variant = BoundVariant::base;
      if (rc.raw().contains("variant"))
        variant = variant_from_string(
            get_string(rc.raw().at("variant"), "config.variant"),
            "config.variant");
      double c_d = 0.0;
      if (rc.raw().contains("c_d"))
        c_d = get_positive(rc.raw().at("c_d"), "config.c_d");
      bound = theorem_bound(l, cert.rho_lower, spec.energy, field,
                            proof_constants(d), variant, c_d);
      out["bound"] = to_json(bound);
      have_bound = true;
    } else {
      out["note"] = "certificate density is zero; no finite bound applies";
    }
  }
  rc.artifacts->add_json("observability.json", out);

  require(result.constant >= 1.0 - 1e-12, "cli.observability.lower",
          "subspace constant " + format_number(result.constant) + " < 1");
  if (have_bound)
    require(std::log(result.constant) <= bound.log_bound,
            "cli.observability.upper",
            "measured constant exceeds the bound: ln " +
                format_number(std::log(result.constant)) + " > " +
                format_number(bound.log_bound));
  if (rc.raw().contains("max_truncation_delta")) {
    const double cap = get_positive(rc.raw().at("max_truncation_delta"),
                                    "config.max_truncation_delta");
    require(result.truncation_delta <= cap, "cli.observability.delta",
            "truncation diagnostic " +
                format_number(result.truncation_delta) + " > " +
                format_number(cap));
  }
}

// ---- optimality-scan -------------------------------------------------------------

inline void run_optimality_scan(const RunContext& rc) {
  const double c_block =
      get_positive(rc.raw().at("c_block"), "config.c_block");
  const double rho = get_number(rc.raw().at("rho"), "config.rho");
  const Eigen::VectorXd pv =
      vector_from_json(rc.raw().at("periods"), "config.periods");
  const std::vector<double> periods(pv.data(), pv.data() + pv.size());
  int nodes = 24;
  if (rc.raw().contains("nodes"))
    nodes = get_int(rc.raw().at("nodes"), "config.nodes");

  const OptimalityScan scan =
      optimality_scan(c_block, rho, periods, nodes, rc.tol());
  rc.artifacts->add_json("optimality.json", to_json(scan));

  CsvTable table;
  table.header = {"period", "radius", "mass", "neg_log_mass", "single_hole"};
  for (const OptimalityRow& r : scan.rows)
    table.add_row({format_number(r.period), format_number(r.radius),
                   format_number(r.mass), format_number(r.neg_log_mass),
                   format_number(r.single_hole)});
  rc.artifacts->add_csv("optimality.csv", table);

  require(scan.slope >= scan.floor - 1e-12, "cli.optimality.floor",
          "fitted decay slope " + format_number(scan.slope) +
              " fell below the guaranteed floor " +
              format_number(scan.floor));
}

// ---- necessity -------------------------------------------------------------------

inline void run_necessity(const RunContext& rc) {
  const FieldMatrix field = field_of(rc);
  const int d = static_cast<int>(field.b.rows());
  const SamplingSet s = set_spec_from_json(rc.raw().at("set"), "config.set");
  const Eigen::MatrixXd translates =
      matrix_rows_from_json(rc.raw().at("translates"), "config.translates");
  int nodes = 32;
  if (rc.raw().contains("nodes"))
    nodes = get_int(rc.raw().at("nodes"), "config.nodes");

  const NecessityReport report =
      necessity_probe(field, s, translates, nodes, rc.tol());
  rc.artifacts->add_json("necessity.json", to_json(report));

  CsvTable table;
  for (int a = 0; a < d; ++a)
    table.header.push_back("y_" + std::to_string(a));
  table.header.push_back("mass");
  table.header.push_back("warning");
  bool in_range = true;
  for (const NecessityEntry& e : report.entries) {
    std::vector<std::string> row;
    for (int a = 0; a < d; ++a) row.push_back(format_number(e.y(a)));
    row.push_back(format_number(e.mass));
    row.push_back(e.warning ? "1" : "0");
    table.add_row(std::move(row));
    in_range = in_range && e.mass >= -1e-12 && e.mass <= 1.0 + 1e-8;
  }
  rc.artifacts->add_csv("necessity.csv", table);

  require(in_range, "cli.necessity.range",
          "a translated mass left [0, 1] beyond roundoff");
}

// ---- heat-control ----------------------------------------------------------------

inline Eigen::VectorXcd initial_state_of(const RunContext& rc,
                                         const BasisPtr& basis) {
  const nlohmann::json& j = rc.raw().at("u0");
  check_keys(j, "config.u0", {}, {"ones", "random", "values"});
  if (j.size() != 1)
    throw validation_error(
        "config.u0", "give exactly one of ones, random, values");
  if (j.contains("ones")) {
    if (!get_bool(j.at("ones"), "config.u0.ones"))
      throw validation_error("config.u0.ones", "must be true when present");
    return Eigen::VectorXcd::Ones(basis->size());
  }
  if (j.contains("random")) {
    if (!get_bool(j.at("random"), "config.u0.random"))
      throw validation_error("config.u0.random", "must be true when present");
    return random_subspace_function(basis, rc.seed()).coefficients;
  }
  const nlohmann::json& vals = j.at("values");
  if (!vals.is_array() ||
      vals.size() != static_cast<std::size_t>(basis->size()))
    throw validation_error("config.u0.values",
                           "need one [re, im] pair per basis mode");
  Eigen::VectorXcd u0(basis->size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const std::string path = "config.u0.values[" + std::to_string(i) + "]";
    if (!vals[i].is_array() || vals[i].size() != 2)
      throw validation_error(path, "expected a [re, im] pair");
    u0(static_cast<Eigen::Index>(i)) =
        Cplx(get_number(vals[i][0], path), get_number(vals[i][1], path));
  }
  return u0;
}

inline void run_heat_control(const RunContext& rc) {
  const FieldMatrix field = field_of(rc);
  const BasisPtr basis = basis_of(rc, field);
  const SamplingSet s = set_spec_from_json(rc.raw().at("set"), "config.set");
  const double horizon =
      get_positive(rc.raw().at("horizon"), "config.horizon");
  int n_time = 64, radial = 32, angular = 64;
  if (rc.raw().contains("n_time"))
    n_time = get_int(rc.raw().at("n_time"), "config.n_time");
  if (rc.raw().contains("radial"))
    radial = get_int(rc.raw().at("radial"), "config.radial");
  if (rc.raw().contains("angular"))
    angular = get_int(rc.raw().at("angular"), "config.angular");

  const ControlProblem problem{basis, s, horizon,
                               initial_state_of(rc, basis)};
  const ControlResult result =
      minimal_norm_control(problem, n_time, rc.tol(), radial, angular);
  rc.artifacts->add_json("control.json", to_json(result));
  rc.artifacts->add_csv("state_norm.csv", state_norm_table(result));

  if (rc.raw().contains("stages")) {
    const int stages = get_int(rc.raw().at("stages"), "config.stages");
    const StagedControlResult staged =
        staged_control(problem, stages, n_time, rc.tol(), radial, angular);
    rc.artifacts->add_json("staged.json", to_json(staged));
  }

  const double scale = problem.u0.norm();
  const double cap = rc.tol().eta_ctrl * scale;
  require(result.final_norm <= cap, "cli.control.final",
          "steered state kept norm " + format_number(result.final_norm));
  require(result.final_norm_refined <= cap, "cli.control.refined",
          "halved-step re-simulation kept norm " +
              format_number(result.final_norm_refined));
  require(result.cost <= result.cost_bound * (1.0 + 1e-9),
          "cli.control.bound",
          "control cost " + format_number(result.cost) +
              " exceeds its ceiling " + format_number(result.cost_bound));
}

inline void dispatch(const std::string& command, const RunContext& rc) {
  if (command == "decompose") return run_decompose(rc);
  if (command == "spectrum") return run_spectrum(rc);
  if (command == "basis-check") return run_basis_check(rc);
  if (command == "bernstein") return run_bernstein(rc);
  if (command == "recursion") return run_recursion(rc);
  if (command == "good-bad") return run_good_bad(rc);
  if (command == "remez") return run_remez(rc);
  if (command == "thickness") return run_thickness(rc);
  if (command == "observability") return run_observability(rc);
  if (command == "optimality-scan") return run_optimality_scan(rc);
  if (command == "necessity") return run_necessity(rc);
  if (command == "heat-control") return run_heat_control(rc);
  throw validation_error("config.command", "unknown command '" + command + "'");
}

}  // namespace detail

// ---- Top-level run ---------------------------------------------------------------

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::string tolerances_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

inline int run_command(const std::string& command, const CliOptions& opt) {
  const std::string config_bytes = detail::read_file(opt.config_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error("config", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg = parse_config(j, command);
  if (opt.seed) cfg.seed = opt.seed;
  if (!opt.out_dir.empty()) cfg.out = opt.out_dir;
  if (!opt.tolerances_path.empty()) {
    nlohmann::json tj;
    try {
      tj = nlohmann::json::parse(detail::read_file(opt.tolerances_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw validation_error("tolerances",
                             std::string("invalid JSON: ") + e.what());
    }
    detail::check_keys(tj, "tolerances", {},
                       {"eta_orth", "eta_eig", "eta_bern", "eta_ctrl",
                        "eta_leak"});
    cfg.tolerances.load_overrides(tj);
  }
  if (cfg.out.empty()) cfg.out = ".";

  ArtifactWriter writer(cfg.out);
  RunContext rc{std::move(cfg), opt.jobs, &writer};
  const auto t0 = std::chrono::steady_clock::now();

  auto write_manifest = [&]() {
    nlohmann::json manifest;
    manifest["command"] = command;
    manifest["config_hash"] = fnv1a_hex(config_bytes);
    manifest["library_version"] = kLibraryVersion;
    manifest["dependencies"] = {
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                              "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"cli11", CLI11_VERSION},
    };
    manifest["seed"] =
        rc.cfg.seed ? nlohmann::json(*rc.cfg.seed) : nlohmann::json(nullptr);
    nlohmann::json names = nlohmann::json::array();
    for (const auto& [name, content] : writer.files()) names.push_back(name);
    manifest["artifacts"] = names;
    // The only run-dependent field; determinism checks must skip it.
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    manifest["timestamp"] = {{"written", detail::iso8601_utc_now()},
                             {"wall_seconds", wall}};
    writer.add_json("manifest.json", manifest);
  };

  try {
    detail::dispatch(command, rc);
  } catch (const invariant_error&) {
    // keep whatever was produced before the failed assertion
    write_manifest();
    writer.flush();
    throw;
  }
  write_manifest();
  writer.flush();
  std::cout << command << ": ok (" << writer.files().size()
            << " artifacts in " << writer.dir() << ")\n";
  return 0;
}

inline int run_cli(int argc, char** argv) {
  CLI::App app{"numerical laboratory for constant-field Landau operators"};
  app.require_subcommand(1);

  static const std::vector<std::pair<std::string, std::string>> commands = {
      {"decompose", "block-diagonalize a field matrix"},
      {"spectrum", "enumerate energy levels below a cutoff"},
      {"basis-check", "build a spectral basis and verify residuals"},
      {"bernstein", "derivative-sum inequality over random functions"},
      {"recursion", "dual-route recursion and spectral-bound diagnostics"},
      {"good-bad", "partition space into good/bad rectangles"},
      {"remez", "polynomial propagation-of-smallness trials"},
      {"thickness", "certify a lower density for a sampling set"},
      {"observability", "restricted-Gram constant vs the proved ceiling"},
      {"optimality-scan", "quadratic decay of ground mass in hole radius"},
      {"necessity", "translated ground-state mass over a sampling set"},
      {"heat-control", "minimal-norm null control on the truncated system"},
  };

  CliOptions opt;
  std::string chosen;
  for (const auto& [name, blurb] : commands) {
    CLI::App* sub = app.add_subcommand(name, blurb);
    sub->add_option("--config", opt.config_path,
                    "JSON experiment description")
        ->required();
    sub->add_option("--out", opt.out_dir,
                    "artifact directory (overrides config)");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&opt](const std::uint64_t& v) { opt.seed = v; },
        "override the config seed");
    sub->add_option("--jobs", opt.jobs, "concurrent scenario evaluations")
        ->check(CLI::Range(1, 4096));
    sub->add_option("--tolerances", opt.tolerances_path,
                    "JSON tolerance overrides (after config overrides)");
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse problem
    return code == 0 ? 0 : 2;      // bad flags are validation failures
  }

  try {
    return run_command(chosen, opt);
  } catch (const validation_error& e) {
    std::cerr << "validation error at " << e.field << ": " << e.what()
              << "\n";
    return 2;
  } catch (const invariant_error& e) {
    std::cerr << "invariant failure [" << e.assertion << "]: " << e.what()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace maglab
