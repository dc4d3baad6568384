#pragma once
// Truncated orthonormal eigenbases of the constant-field magnetic Schrodinger
// operator.  Discrete modes are generated per 2x2 block by commuting ladder
// operators acting on the block ground state; field-free directions carry
// windowed plane waves on a symmetric wavevector lattice, re-orthonormalized
// through the symmetric (Loewdin) square root of their analytic Gram matrix.
// The module also provides grid evaluation, pointwise evaluation in original
// coordinates, seeded random subspace functions, and phased magnetic
// translations.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "maglab/errors.hpp"
#include "maglab/field.hpp"
#include "maglab/grid.hpp"
#include "maglab/magderiv.hpp"
#include "maglab/quadrature.hpp"
#include "maglab/tolerances.hpp"

namespace maglab {

// One eigenmode of the block-diagonalized operator: oscillator level n_j and
// degeneracy index l_j per block, a wavevector along the field-free
// directions, and the eigenvalue sum_j (2 n_j + 1) C_j + |xi|^2.
struct LandauMode {
  std::vector<int> n;
  std::vector<int> l;
  Eigen::VectorXd xi;
  double energy = 0.0;
};

inline double mode_energy(const BlockNormalForm& nf, const std::vector<int>& n,
                          const Eigen::VectorXd& xi) {
  double e = 0.0;
  for (int j = 0; j < nf.block_count(); ++j)
    e += (2.0 * n[j] + 1.0) * nf.frequencies[j];
  return e + xi.squaredNorm();
}

struct SpectralBasis {
  BlockNormalForm nf;
  double cutoff = 0.0;
  int l_max = 0;
  double sigma_null = 0.0;
  std::vector<Eigen::VectorXd> null_spec;  // admitted wavevectors
  std::vector<LandauMode> modes;
  int excluded = 0;             // candidate tuples dropped by the cutoff
  std::vector<double> leakage;  // per-mode spectral mass above the cutoff
  LandauContext ctx;            // adapted grid plus derivative machinery
  std::vector<int> coef_extents;  // degree-box extents, grid axis order
  Eigen::MatrixXcd coef;          // (prod extents) x modes degree tensors
  Eigen::MatrixXcd values;        // grid-size x modes node values

  explicit SpectralBasis(LandauContext c) : ctx(std::move(c)) {}

  int size() const { return static_cast<int>(modes.size()); }
};

using BasisPtr = std::shared_ptr<const SpectralBasis>;

struct SpectralFunction {
  BasisPtr basis;
  CVec coefficients;

  double norm_sq() const { return coefficients.squaredNorm(); }
};

namespace detail {

// Apply a raising ladder to a two-axis degree tensor.  Both ladders carry
// -i/sqrt(2) sqrt(p) on the first axis; the second-axis sign distinguishes the
// level ladder (minus, raises the eigenvalue by 2C) from the degeneracy ladder
// (plus, commutes with the block Hamiltonian).
inline Eigen::MatrixXcd raise_block(const Eigen::MatrixXcd& c, double sign2) {
  const int rows = static_cast<int>(c.rows());
  const int cols = static_cast<int>(c.cols());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rows, cols);
  const double inv = 1.0 / std::sqrt(2.0);
  for (int p = 0; p < rows; ++p)
    for (int q = 0; q < cols; ++q) {
      Cplx v = 0.0;
      if (p > 0) v += Cplx(0.0, -inv) * std::sqrt(double(p)) * c(p - 1, q);
      if (q > 0) v += sign2 * inv * std::sqrt(double(q)) * c(p, q - 1);
      out(p, q) = v;
    }
  return out;
}

// Normalized (n, l) block mode as a degree tensor of the given extent.
inline Eigen::MatrixXcd block_mode_tensor(int n, int l, int extent) {
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(extent, extent);
  c(0, 0) = 1.0;
  for (int i = 0; i < n; ++i) c = raise_block(c, -1.0);
  for (int i = 0; i < l; ++i) c = raise_block(c, +1.0);
  double fac = 1.0;
  for (int i = 2; i <= n; ++i) fac *= i;
  for (int i = 2; i <= l; ++i) fac *= i;
  return c / std::sqrt(fac);
}

// Smallest coefficient count keeping the truncated wave-packet tail below the
// target squared mass.  |c_p|^2 follows a Poisson law with mean k^2/2.  The
// stop rule looks at the term size past the distribution's mode; subtracting
// the cumulative sum from 1 would cancel to rounding noise near 1e-16, far
// above the target.
inline int coherent_count(double k, double tail_target) {
  const double lambda = 0.5 * k * k;
  double term = std::exp(-lambda);
  int p = 0;
  while ((p <= lambda || term > 0.01 * tail_target) && p < 400) {
    ++p;
    term *= lambda / p;
  }
  return p + 1;
}

inline std::string pair_label(int i, int j, double value) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "modes (%d, %d), residual %.3e", i, j, value);
  return buf;
}

}  // namespace detail

// Build the orthonormal basis of all modes with energy at most `cutoff`,
// degeneracy indices up to `l_max`, and the listed null-direction wavevectors.
// `sigma_null` <= 0 selects the default window width 6 / sqrt(cutoff).
inline BasisPtr build_basis(const BlockNormalForm& nf, double cutoff, int l_max,
                            const std::vector<Eigen::VectorXd>& null_spec,
                            int nodes_per_axis, double sigma_null = 0.0,
                            const Tolerances& tol = {}) {
  if (!(cutoff > 0.0))
    throw validation_error("basis.cutoff", "energy cutoff must be positive");
  if (l_max < 0)
    throw validation_error("basis.l_max", "degeneracy cap must be >= 0");
  const int blocks = nf.block_count();
  const int nullity = nf.nullity;
  const double e0 = spectrum_bottom(nf);
  if (nullity == 0 && !null_spec.empty())
    throw validation_error("basis.null_spec",
                           "wavevectors supplied for a full-rank field");
  for (const Eigen::VectorXd& xi : null_spec) {
    if (xi.size() != nullity)
      throw validation_error("basis.null_spec",
                             "wavevector length must equal the nullity");
    if (!xi.allFinite() || xi.squaredNorm() > cutoff - e0 + 1e-12)
      throw validation_error("basis.null_spec",
                             "wavevector energy exceeds cutoff - E0");
  }
  if (sigma_null <= 0.0) sigma_null = 6.0 / std::sqrt(cutoff);

  Eigen::MatrixXd b = nf.u * nf.canonical() * nf.u.transpose();
  b = 0.5 * (b - b.transpose().eval());  // exact antisymmetry
  auto basis = std::make_shared<SpectralBasis>(
      make_context(FieldMatrix(std::move(b)), nodes_per_axis, sigma_null));
  // All frames below come from the context's own decomposition: the caller's
  // u may differ by a per-block gauge rotation, which must not leak into the
  // stored modes.
  basis->nf = basis->ctx.nf;
  basis->cutoff = cutoff;
  basis->l_max = l_max;
  basis->sigma_null = sigma_null;
  basis->null_spec = null_spec;
  const LandauContext& ctx = basis->ctx;
  const BlockNormalForm& bnf = basis->nf;

  // Candidate levels: per block n_j runs over the axis-aligned box that the
  // cutoff admits for that block alone; the joint energy filter below counts
  // the dropped corners.
  std::vector<int> n_cap(blocks);
  for (int j = 0; j < blocks; ++j) {
    const double c = bnf.frequencies[j];
    n_cap[j] = std::max(0, int(std::floor((cutoff / c - 1.0) / 2.0 + 1e-12)));
  }

  struct Candidate {
    std::vector<int> n, l;
    int xi_index = -1;  // -1 encodes the full-rank (empty) wavevector
    double energy = 0.0;
  };
  std::vector<Candidate> admitted;
  const int xi_count = nullity > 0 ? static_cast<int>(null_spec.size()) : 1;

  std::vector<int> n(blocks, 0);
  bool more_n = true;
  while (more_n) {
    std::vector<int> l(blocks, 0);
    bool more_l = true;
    while (more_l) {
      for (int t = 0; t < xi_count; ++t) {
        const bool has_xi = nullity > 0;
        const Eigen::VectorXd xi =
            has_xi ? null_spec[t] : Eigen::VectorXd::Zero(0);
        const double e = mode_energy(bnf, n, xi);
        if (e <= cutoff)
          admitted.push_back({n, l, has_xi ? t : -1, e});
        else
          ++basis->excluded;
      }
      more_l = false;
      for (int j = 0; j < blocks; ++j) {
        if (l[j] < l_max) {
          ++l[j];
          std::fill(l.begin(), l.begin() + j, 0);
          more_l = true;
          break;
        }
      }
      if (blocks == 0) break;
    }
    more_n = false;
    for (int j = 0; j < blocks; ++j) {
      if (n[j] < n_cap[j]) {
        ++n[j];
        std::fill(n.begin(), n.begin() + j, 0);
        more_n = true;
        break;
      }
    }
  }

  std::sort(admitted.begin(), admitted.end(),
            [](const Candidate& a, const Candidate& c) {
              if (a.energy != c.energy) return a.energy < c.energy;
              if (a.n != c.n) return a.n < c.n;
              if (a.l != c.l) return a.l < c.l;
              return a.xi_index < c.xi_index;
            });

  // Degree-box extents.
  basis->coef_extents.assign(ctx.dim(), 1);
  for (const Candidate& cand : admitted)
    for (int j = 0; j < blocks; ++j) {
      const int need = cand.n[j] + cand.l[j] + 1;
      basis->coef_extents[2 * j] = std::max(basis->coef_extents[2 * j], need);
      basis->coef_extents[2 * j + 1] = basis->coef_extents[2 * j];
    }
  if (nullity > 0)
    for (int t = 0; t < xi_count; ++t) {
      int need = 1;
      for (int a = 0; a < nullity; ++a)
        need = std::max(
            need, detail::coherent_count(null_spec[t](a) * sigma_null, 1e-26));
      for (int a = 0; a < nullity; ++a) {
        int& ext = basis->coef_extents[2 * blocks + a];
        ext = std::max(ext, need);
      }
    }
  for (int a = 0; a < ctx.dim(); ++a)
    if (basis->coef_extents[a] > nodes_per_axis - 3)
      throw validation_error(
          "basis.nodes_per_axis",
          "degree box needs " + std::to_string(basis->coef_extents[a] + 3) +
              " nodes on axis " + std::to_string(a));

  std::int64_t tensor_size = 1;
  for (int e : basis->coef_extents) tensor_size *= e;

  // Null-direction wave packets and their Loewdin mixing weights.
  std::vector<std::vector<Eigen::VectorXcd>> packets(xi_count);
  Eigen::MatrixXd mix;  // columns express orthonormal packets in raw ones
  if (nullity > 0 && xi_count > 0) {
    for (int t = 0; t < xi_count; ++t) {
      packets[t].resize(nullity);
      for (int a = 0; a < nullity; ++a) {
        const int ext = basis->coef_extents[2 * blocks + a];
        packets[t][a] =
            coherent_coefficients(null_spec[t](a) * sigma_null, ext - 1);
      }
    }
    Eigen::MatrixXd gram(xi_count, xi_count);
    for (int s = 0; s < xi_count; ++s)
      for (int t = 0; t < xi_count; ++t) {
        double g = 1.0;
        for (int a = 0; a < nullity; ++a) {
          const double dk = (null_spec[s](a) - null_spec[t](a)) * sigma_null;
          g *= std::exp(-0.25 * dk * dk);
        }
        gram(s, t) = g;
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.eigenvalues().minCoeff() < Tolerances::gram_floor)
      throw invariant_error(
          "eigenbasis.null_gram",
          "wavevector lattice too dense: smallest Gram eigenvalue " +
              std::to_string(es.eigenvalues().minCoeff()));
    mix = es.eigenvectors() *
          es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
          es.eigenvectors().transpose();
  }

  const int m_count = static_cast<int>(admitted.size());
  basis->coef.resize(tensor_size, m_count);
  basis->coef.setZero();
  basis->modes.reserve(m_count);
  basis->leakage.resize(m_count, 0.0);

  // Raw degree tensor of one candidate: outer product of block tensors and
  // (for xi_index >= 0) that wavevector's packet coefficients.
  std::vector<Eigen::MatrixXcd> block_cache;
  auto fill_tensor = [&](const Candidate& cand, int xi_index, CVec& out) {
    block_cache.clear();
    for (int j = 0; j < blocks; ++j)
      block_cache.push_back(detail::block_mode_tensor(
          cand.n[j], cand.l[j], basis->coef_extents[2 * j]));
    out.setZero(tensor_size);
    std::vector<int> idx(ctx.dim(), 0);
    for (std::int64_t flat = 0; flat < tensor_size; ++flat) {
      Cplx v = 1.0;
      for (int j = 0; j < blocks && v != Cplx(0.0); ++j)
        v *= block_cache[j](idx[2 * j], idx[2 * j + 1]);
      if (xi_index >= 0)
        for (int a = 0; a < nullity && v != Cplx(0.0); ++a) {
          const Eigen::VectorXcd& pk = packets[xi_index][a];
          const int p = idx[2 * blocks + a];
          v *= p < pk.size() ? pk(p) : Cplx(0.0);
        }
      out(flat) = v;
      for (int a = 0; a < ctx.dim(); ++a) {
        if (++idx[a] < basis->coef_extents[a]) break;
        idx[a] = 0;
      }
    }
  };

  CVec raw(tensor_size);
  for (int i = 0; i < m_count; ++i) {
    const Candidate& cand = admitted[i];
    if (cand.xi_index < 0) {
      fill_tensor(cand, -1, raw);
      basis->coef.col(i) = raw;
    } else {
      // Loewdin-orthonormal packet: mix the raw tensors of every admitted
      // wavevector that shares this candidate's (n, l).
      for (int t = 0; t < xi_count; ++t) {
        const double w = mix(t, cand.xi_index);
        if (w == 0.0) continue;
        fill_tensor(cand, t, raw);
        basis->coef.col(i) += w * raw;
      }
    }
    LandauMode mode;
    mode.n = cand.n;
    mode.l = cand.l;
    mode.xi = cand.xi_index >= 0 ? null_spec[cand.xi_index]
                                 : Eigen::VectorXd::Zero(0);
    mode.energy = cand.energy;
    basis->modes.push_back(std::move(mode));

    // Spectral mass above the cutoff: the discrete part is exact, so only the
    // packet's wavevector spread leaks.  Union bound over null axes with the
    // leftover energy budget split evenly.
    if (cand.xi_index >= 0) {
      const double budget =
          cutoff - mode_energy(bnf, cand.n, Eigen::VectorXd::Zero(nullity));
      if (budget <= 0.0) {
        basis->leakage[i] = 1.0;
      } else {
        const double tau = std::sqrt(budget / nullity);
        double p = 0.0;
        for (int a = 0; a < nullity; ++a) {
          const double xi_a = basis->modes.back().xi(a);
          p += 0.5 * std::erfc(sigma_null * (tau - xi_a)) +
               0.5 * std::erfc(sigma_null * (tau + xi_a));
        }
        basis->leakage[i] = std::sqrt(std::min(1.0, p));
      }
    }
  }

  // Synthesize node values.
  basis->values.resize(ctx.grid.size(), m_count);
  std::vector<Eigen::MatrixXd> synth(ctx.dim());
  for (int a = 0; a < ctx.dim(); ++a)
    synth[a] = synthesis_matrix(ctx.grid.axis(a), basis->coef_extents[a]);
  for (int i = 0; i < m_count; ++i) {
    CVec buf = basis->coef.col(i);
    std::vector<int> dims = basis->coef_extents;
    for (int a = 0; a < ctx.dim(); ++a)
      buf = detail::tensor_apply(dims, buf, a, synth[a]);
    basis->values.col(i) = buf;
  }

  // Orthonormality on the grid.
  if (m_count > 0) {
    const Eigen::VectorXd w = basis->ctx.grid.weights();
    Eigen::MatrixXcd weighted = basis->values;
    weighted.array().colwise() *= w.array().cast<Cplx>();
    const Eigen::MatrixXcd gram = basis->values.adjoint() * weighted;
    for (int i = 0; i < m_count; ++i)
      for (int j = 0; j < m_count; ++j) {
        const double dev = std::abs(gram(i, j) - (i == j ? 1.0 : 0.0));
        if (dev > tol.eta_orth)
          throw invariant_error("eigenbasis.orthonormality",
                                detail::pair_label(i, j, dev));
      }
  }

  // Eigen-residual of the block-diagonal part: the discrete energy must be
  // reproduced by the derivative machinery, windowed packets excepted along
  // their free axes (their spread is what `leakage` reports).
  for (int i = 0; i < m_count; ++i) {
    const CVec v = basis->values.col(i);
    CVec hb = CVec::Zero(v.size());
    for (int a = 0; a < 2 * blocks; ++a)
      hb += detail::tilde_axis(ctx, a, detail::tilde_axis(ctx, a, v));
    const double e_disc =
        mode_energy(bnf, basis->modes[i].n, Eigen::VectorXd::Zero(nullity));
    const double res = std::sqrt(ctx.grid.norm_sq(hb - e_disc * v)) /
                       std::sqrt(ctx.grid.norm_sq(v));
    if (res > tol.eta_eig) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "mode %d, residual %.3e", i, res);
      throw invariant_error("eigenbasis.eigen_residual", buf);
    }
  }

  return basis;
}

// Grid values of a coefficient vector.
inline CVec grid_values(const SpectralFunction& f) {
  if (!f.basis) throw validation_error("function.basis", "missing basis");
  if (f.coefficients.size() != f.basis->size())
    throw validation_error("function.coefficients",
                           "coefficient count differs from basis size");
  return f.basis->values * f.coefficients;
}

// L2-orthogonal projection of grid values onto the basis span.
inline SpectralFunction project(BasisPtr basis, const CVec& node_values) {
  if (!basis) throw validation_error("function.basis", "missing basis");
  if (node_values.size() != basis->ctx.grid.size())
    throw validation_error("function.values", "grid size mismatch");
  const Eigen::VectorXd w = basis->ctx.grid.weights();
  CVec weighted = node_values;
  weighted.array() *= w.array().cast<Cplx>();
  return SpectralFunction{basis, basis->values.adjoint() * weighted};
}

// Relative L2 distance between grid values and their projection.
inline double projection_defect(const SpectralFunction& proj,
                                const CVec& node_values) {
  const CVec back = grid_values(proj);
  const double base = proj.basis->ctx.grid.norm_sq(node_values);
  if (base <= 0.0) return 0.0;
  return std::sqrt(proj.basis->ctx.grid.norm_sq(node_values - back) / base);
}

// The normalized bottom eigenfunction: per-block Gaussian ground states, times
// a unit-norm Gaussian envelope along any field-free directions.
inline SpectralFunction ground_state(const BlockNormalForm& nf,
                                     int nodes_per_axis,
                                     double sigma_null = 0.0,
                                     const Tolerances& tol = {}) {
  if (nf.block_count() < 1)
    throw validation_error("ground.rank",
                           "field must have at least one nonzero frequency");
  std::vector<Eigen::VectorXd> xs;
  if (nf.nullity > 0) xs.push_back(Eigen::VectorXd::Zero(nf.nullity));
  // Slightly raised cutoff: admission is strict, and the context re-derives
  // frequencies from the reconstructed matrix with last-bit differences.
  const double cutoff = spectrum_bottom(nf) * (1.0 + 1e-9);
  BasisPtr basis =
      build_basis(nf, cutoff, 0, xs, nodes_per_axis, sigma_null, tol);
  if (basis->size() != 1)
    throw invariant_error("eigenbasis.ground",
                          "bottom basis has " + std::to_string(basis->size()) +
                              " modes instead of 1");
  CVec c(1);
  c(0) = 1.0;
  return SpectralFunction{basis, c};
}

// Seeded complex-Gaussian coefficients, normalized.
inline SpectralFunction random_subspace_function(BasisPtr basis,
                                                 std::uint64_t seed) {
  if (!basis || basis->size() == 0)
    throw validation_error("basis.empty", "cannot sample an empty basis");
  detail::NormalSampler sampler(seed);
  CVec c(basis->size());
  for (int i = 0; i < basis->size(); ++i) {
    const double re = sampler();
    const double im = sampler();
    c(i) = Cplx(re, im);
  }
  const double nrm = c.norm();
  if (!(nrm > 0.0))
    throw invariant_error("eigenbasis.random", "sampled a zero vector");
  return SpectralFunction{std::move(basis), c / nrm};
}

// Evaluate at arbitrary points given in original coordinates (rows of `x`),
// by contracting the degree tensor with per-axis basis rows at U^T x.
inline CVec evaluate_points(const SpectralFunction& f,
                            const Eigen::MatrixXd& x) {
  const SpectralBasis& b = *f.basis;
  if (x.cols() != b.nf.dim())
    throw validation_error("function.points", "points must have d columns");
  const CVec tensor = b.coef * f.coefficients;
  CVec out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Eigen::VectorXd y = b.nf.u.transpose() * x.row(r).transpose();
    CVec buf = tensor;
    std::vector<int> dims = b.coef_extents;
    for (int a = 0; a < b.ctx.dim(); ++a) {
      const Axis& ax = b.ctx.grid.axis(a);
      const Eigen::VectorXd h =
          hermite_functions(b.coef_extents[a] - 1, y(a) / ax.scale) /
          std::sqrt(ax.scale);
      buf = detail::tensor_apply(dims, buf, a, h.transpose());
    }
    out(r) = buf(0);
  }
  return out;
}

// ---- Magnetic translations --------------------------------------------------
//
// (T_t f)(x) = exp(i chi(x, t)) f(x - t) with chi(x, t) = -x^T B t / 2, the
// phase that commutes with the magnetic derivatives of this library's sign
// convention.  Compositions pick up exp(i theta), theta = t^T B t' / 2.

struct TranslationResult {
  CVec values;
  double mass_defect = 0.0;  // quadrature mass lost to the grid boundary
  bool boundary_warning = false;
};

inline double translation_phase(const FieldMatrix& f, const Eigen::VectorXd& t,
                                const Eigen::VectorXd& t2) {
  return 0.5 * t.dot(f.b * t2);
}

inline TranslationResult magnetic_translate(const LandauContext& ctx,
                                            const CVec& f,
                                            const Eigen::VectorXd& shift,
                                            const Tolerances& tol = {}) {
  if (shift.size() != ctx.dim() || !shift.allFinite())
    throw validation_error("translate.vector",
                           "shift must be a finite length-d vector");
  if (f.size() != ctx.grid.size())
    throw validation_error("translate.values", "grid size mismatch");
  const Eigen::VectorXd t = ctx.nf.u.transpose() * shift;  // grid frame

  TranslationResult res;
  res.values = f;
  std::vector<int> dims = ctx.grid.extents();
  for (int a = 0; a < ctx.dim(); ++a) {
    const Axis& ax = ctx.grid.axis(a);
    const Eigen::VectorXd unit = ax.nodes / ax.scale;
    const Eigen::VectorXd target = (ax.nodes.array() - t(a)) / ax.scale;
    const Eigen::MatrixXd shift_matrix = gaussian_eval_matrix(unit, target);
    res.values = detail::tensor_apply(dims, res.values, a, shift_matrix);
  }

  const Eigen::VectorXd w = ctx.by * t;  // phase gradient, grid frame
  for (std::int64_t i = 0; i < res.values.size(); ++i) {
    double phi = 0.0;
    for (int a = 0; a < ctx.dim(); ++a) phi += ctx.grid.coordinate(a)(i) * w(a);
    res.values(i) *= std::exp(Cplx(0.0, -0.5 * phi));
  }

  const double before = ctx.grid.norm_sq(f);
  if (before > 0.0) {
    res.mass_defect = 1.0 - ctx.grid.norm_sq(res.values) / before;
    res.boundary_warning = std::abs(res.mass_defect) > tol.eta_leak;
  }
  return res;
}

struct TranslatedFunction {
  SpectralFunction projected;
  double leakage = 0.0;      // relative mass outside the basis span
  double mass_defect = 0.0;  // grid-boundary loss before projection
};

inline TranslatedFunction magnetic_translate(const SpectralFunction& f,
                                             const Eigen::VectorXd& shift,
                                             const Tolerances& tol = {}) {
  const CVec g = grid_values(f);
  TranslationResult moved = magnetic_translate(f.basis->ctx, g, shift, tol);
  TranslatedFunction out;
  out.projected = project(f.basis, moved.values);
  out.leakage = projection_defect(out.projected, moved.values);
  out.mass_defect = moved.mass_defect;
  return out;
}

// ---- JSON -------------------------------------------------------------------

inline nlohmann::json to_json(const LandauMode& m) {
  nlohmann::json j;
  j["n"] = m.n;
  j["l"] = m.l;
  j["xi"] = std::vector<double>(m.xi.data(), m.xi.data() + m.xi.size());
  j["energy"] = m.energy;
  return j;
}

inline nlohmann::json to_json(const SpectralBasis& b) {
  nlohmann::json j;
  j["normal_form"] = to_json(b.nf);
  j["cutoff"] = b.cutoff;
  j["l_max"] = b.l_max;
  j["sigma_null"] = b.sigma_null;
  j["excluded"] = b.excluded;
  nlohmann::json modes = nlohmann::json::array();
  for (int i = 0; i < b.size(); ++i) {
    nlohmann::json m = to_json(b.modes[i]);
    m["leakage"] = b.leakage[i];
    modes.push_back(std::move(m));
  }
  j["modes"] = std::move(modes);
  nlohmann::json grid;
  grid["nodes_per_axis"] = b.ctx.grid.extents()[0];
  nlohmann::json scales = nlohmann::json::array();
  for (int a = 0; a < b.ctx.dim(); ++a) scales.push_back(b.ctx.grid.axis(a).scale);
  grid["scales"] = std::move(scales);
  j["grid"] = std::move(grid);
  return j;
}

inline nlohmann::json coefficients_to_json(const CVec& c) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < c.size(); ++i)
    arr.push_back({c(i).real(), c(i).imag()});
  return arr;
}

inline CVec coefficients_from_json(const nlohmann::json& j) {
  if (!j.is_array())
    throw validation_error("coefficients", "expected an array of [re, im]");
  CVec c(j.size());
  Eigen::Index i = 0;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2)
      throw validation_error("coefficients", "entries must be [re, im]");
    c(i++) = Cplx(e[0].get<double>(), e[1].get<double>());
  }
  return c;
}

}  // namespace maglab
