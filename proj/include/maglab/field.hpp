#pragma once
// Constant antisymmetric field matrices: validation, real block normal form,
// derived norms, and the bottom of the associated spectrum.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "maglab/errors.hpp"
#include "maglab/tolerances.hpp"

namespace maglab {

// Antisymmetric real d x d matrix, d >= 2.  Antisymmetry is required exactly
// (tolerance zero): near-antisymmetric input is rejected, never symmetrized.
struct FieldMatrix {
  Eigen::MatrixXd b;

  explicit FieldMatrix(Eigen::MatrixXd m) : b(std::move(m)) {
    if (b.rows() != b.cols())
      throw validation_error("field.b", "matrix must be square");
    if (b.rows() < 2)
      throw validation_error("field.b", "dimension must be at least 2");
    double worst = 0.0;
    int wi = 0, wj = 0;
    for (int i = 0; i < b.rows(); ++i)
      for (int j = 0; j < b.cols(); ++j) {
        if (!std::isfinite(b(i, j)))
          throw validation_error("field.b", "entries must be finite");
        const double v = std::abs(b(i, j) + b(j, i));
        if (v > worst) worst = v, wi = i, wj = j;
      }
    if (worst != 0.0)
      throw validation_error(
          "field.b", "matrix is not antisymmetric: |b(" + std::to_string(wi) +
                         "," + std::to_string(wj) + ") + b(" +
                         std::to_string(wj) + "," + std::to_string(wi) +
                         ")| = " + std::to_string(worst));
  }

  int dim() const { return static_cast<int>(b.rows()); }
};

// Orthogonal U with U^T B U = diag of 2x2 rotations [[0, c_j], [-c_j, 0]]
// (frequencies descending, +c_j in the upper-right slot) padded by zeros.
struct BlockNormalForm {
  Eigen::MatrixXd u;
  std::vector<double> frequencies;  // descending, strictly positive
  int nullity = 0;

  int dim() const { return static_cast<int>(u.rows()); }
  int block_count() const { return static_cast<int>(frequencies.size()); }

  // The block-diagonal image U^T B U this decomposition asserts.
  Eigen::MatrixXd canonical() const {
    const int d = dim();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
    for (int j = 0; j < block_count(); ++j) {
      c(2 * j, 2 * j + 1) = frequencies[j];
      c(2 * j + 1, 2 * j) = -frequencies[j];
    }
    return c;
  }
};

namespace detail {
// true if column a precedes column b lexicographically
inline bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}
}  // namespace detail

inline BlockNormalForm normal_form(const FieldMatrix& f) {
  const int d = f.dim();
  const Eigen::MatrixXd& b = f.b;

  // iB is Hermitian with spectrum {+c_j, -c_j} plus zeros, so the frequencies
  // are read off with absolute accuracy ~ eps * |B| -- fine enough to resolve
  // the relative truncation threshold (diagonalizing -B^2 instead would blur
  // null directions up to sqrt(eps) * |B|).  Each eigenvector z = p + iq with
  // iBz = cz, c > 0, satisfies Bp = cq and Bq = -cp: an exactly invariant
  // real plane.  Eigenvectors of coinciding frequencies are orthonormal, and
  // z is orthogonal to its own conjugate (eigenvalue -c), so the real planes
  // come out orthonormal without any multiplicity handling.
  const std::complex<double> iunit(0.0, 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      (iunit * b.cast<std::complex<double>>()).eval());
  if (es.info() != Eigen::Success)
    throw invariant_error("normal_form.eigensolver", "eigensolver failed");
  const Eigen::VectorXd lam = es.eigenvalues();  // ascending, real
  const double op = std::max(std::abs(lam(0)), std::abs(lam(d - 1)));
  const double cut = Tolerances::freq_truncation * op;  // frequency cutoff

  struct Block {
    Eigen::VectorXd c0, c1;
    double freq;
  };
  std::vector<Block> blocks;
  std::vector<Eigen::VectorXcd> null_z;

  for (int i = 0; i < d; ++i) {
    if (std::abs(lam(i)) <= cut) {
      null_z.push_back(es.eigenvectors().col(i));
      continue;
    }
    if (lam(i) < 0) continue;  // the -c partner of a +c eigenvector
    Eigen::VectorXcd z = es.eigenvectors().col(i);
    // fix the phase gauge deterministically: largest-|.| entry real positive
    int k0 = 0;
    z.cwiseAbs().maxCoeff(&k0);
    z *= std::conj(z(k0)) / std::abs(z(k0));
    Eigen::VectorXd p = z.real();
    Eigen::VectorXd q = z.imag();
    p.normalize();
    q -= p.dot(q) * p;
    q.normalize();
    // (q, p) ordering puts +c in the upper-right slot: q^T B p = c |q|^2
    blocks.push_back({q, p, lam(i)});
  }

  // Real orthonormal basis of the (real) null space from the complex null
  // eigenvectors: the real and imaginary parts span it; pivoted QR extracts
  // an orthonormal set of the right size deterministically.
  std::vector<Eigen::VectorXd> null_cols;
  if (!null_z.empty()) {
    const int k = static_cast<int>(null_z.size());
    Eigen::MatrixXd m(d, 2 * k);
    for (int j = 0; j < k; ++j) {
      m.col(2 * j) = null_z[static_cast<std::size_t>(j)].real();
      m.col(2 * j + 1) = null_z[static_cast<std::size_t>(j)].imag();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
    for (int j = 0; j < k; ++j) null_cols.push_back(q.col(j));
  }

  std::sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b2) {
    if (a.freq != b2.freq) return a.freq > b2.freq;
    const Eigen::VectorXd& la = detail::lex_less(a.c0, a.c1) ? a.c0 : a.c1;
    const Eigen::VectorXd& lb = detail::lex_less(b2.c0, b2.c1) ? b2.c0 : b2.c1;
    return detail::lex_less(la, lb);
  });

  if (2 * static_cast<int>(blocks.size()) + static_cast<int>(null_cols.size()) !=
      d)
    throw invariant_error("normal_form.column_count",
                          "blocks and null directions do not fill R^d");

  BlockNormalForm nf;
  nf.u.resize(d, d);
  int col = 0;
  for (const auto& blk : blocks) {
    nf.u.col(col++) = blk.c0;
    nf.u.col(col++) = blk.c1;
    nf.frequencies.push_back(blk.freq);
  }
  for (const auto& c : null_cols) nf.u.col(col++) = c;
  nf.nullity = d - 2 * nf.block_count();

  const double uerr = (nf.u.transpose() * nf.u - Eigen::MatrixXd::Identity(d, d))
                          .cwiseAbs()
                          .maxCoeff();
  if (uerr > Tolerances::u_orthogonality)
    throw invariant_error("normal_form.u_orthogonality",
                          "U^T U deviates from identity by " +
                              std::to_string(uerr));
  const double rerr =
      (nf.u.transpose() * b * nf.u - nf.canonical()).cwiseAbs().maxCoeff();
  if (rerr > Tolerances::normal_form_reconstruction * std::max(op, 1.0))
    throw invariant_error("normal_form.reconstruction",
                          "U^T B U deviates from block form by " +
                              std::to_string(rerr));
  return nf;
}

struct FieldNorms {
  double frobenius_sq = 0.0;  // sum of squared entries of B
  double one_norm_bsq = 0.0;  // max column l1 norm of B^2
  double op_norm = 0.0;       // largest frequency
};

inline FieldNorms field_norms(const FieldMatrix& f, const BlockNormalForm& nf) {
  FieldNorms n;
  n.frobenius_sq = f.b.squaredNorm();
  const Eigen::MatrixXd b2 = f.b * f.b;
  n.one_norm_bsq = b2.cwiseAbs().colwise().sum().maxCoeff();
  n.op_norm = nf.frequencies.empty() ? 0.0 : nf.frequencies.front();
  return n;
}

// Bottom of the spectrum: sum of the frequencies.
inline double spectrum_bottom(const BlockNormalForm& nf) {
  double e0 = 0.0;
  for (double c : nf.frequencies) e0 += c;
  return e0;
}

struct LevelEntry {
  double base_energy = 0.0;
  std::vector<int> n;  // per-block quantum numbers
  bool band = false;   // true when a continuous direction is present
};

// All levels sum_j (2 n_j + 1) c_j <= e_max, sorted by energy then by the
// multi-index lexicographically.  Empty when e_max is below the bottom.
inline std::vector<LevelEntry> enumerate_levels(const BlockNormalForm& nf,
                                                double e_max) {
  std::vector<LevelEntry> out;
  const int m = nf.block_count();
  const double e0 = spectrum_bottom(nf);
  if (e_max < e0) return out;
  std::vector<int> n(m, 0);
  const bool band = nf.nullity > 0;
  // depth-first enumeration in lexicographic order
  auto rec = [&](auto&& self, int j, double acc) -> void {
    if (j == m) {
      out.push_back({acc, n, band});
      return;
    }
    for (int k = 0;; ++k) {
      const double e = acc + (2 * k + 1) * nf.frequencies[j];
      if (e > e_max) break;
      n[j] = k;
      self(self, j + 1, e);
    }
    n[j] = 0;
  };
  rec(rec, 0, 0.0);
  std::stable_sort(out.begin(), out.end(),
                   [](const LevelEntry& a, const LevelEntry& b) {
                     if (a.base_energy != b.base_energy)
                       return a.base_energy < b.base_energy;
                     return a.n < b.n;
                   });
  return out;
}

// ---- JSON ------------------------------------------------------------------

inline nlohmann::json to_json(const FieldMatrix& f) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < f.dim(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < f.dim(); ++j) r.push_back(f.b(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline FieldMatrix field_from_json(const nlohmann::json& j,
                                   const std::string& path = "field.b") {
  if (!j.is_array() || j.empty())
    throw validation_error(path, "expected a non-empty array of rows");
  const int d = static_cast<int>(j.size());
  Eigen::MatrixXd b(d, d);
  for (int i = 0; i < d; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != d)
      throw validation_error(path, "row " + std::to_string(i) +
                                       " must have " + std::to_string(d) +
                                       " entries");
    for (int k = 0; k < d; ++k) {
      if (!j[i][k].is_number())
        throw validation_error(path, "entry (" + std::to_string(i) + "," +
                                         std::to_string(k) +
                                         ") is not a number");
      b(i, k) = j[i][k].get<double>();
    }
  }
  return FieldMatrix(b);
}

inline nlohmann::json to_json(const BlockNormalForm& nf) {
  nlohmann::json u = nlohmann::json::array();
  for (int i = 0; i < nf.dim(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < nf.dim(); ++j) r.push_back(nf.u(i, j));
    u.push_back(std::move(r));
  }
  return {{"u", u}, {"frequencies", nf.frequencies}, {"nullity", nf.nullity}};
}

}  // namespace maglab
