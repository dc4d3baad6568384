#pragma once
// Independent reference computations used by the test suite.  These
// deliberately take different numerical routes than the library code.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "maglab/grid.hpp"
#include "maglab/magderiv.hpp"

namespace oracles {

inline Eigen::MatrixXd random_antisymmetric(int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      b(i, j) = u(rng);
      b(j, i) = -b(i, j);
    }
  return b;
}

// Frequencies of an antisymmetric matrix via the general complex eigensolver
// (the library uses a symmetric solve on -B^2 instead).
inline std::vector<double> frequencies_by_complex_eig(const Eigen::MatrixXd& b,
                                                      double cut) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(b);
  std::vector<double> f;
  for (int i = 0; i < b.rows(); ++i) {
    const double im = es.eigenvalues()(i).imag();
    if (im > cut) f.push_back(im);
  }
  std::sort(f.rbegin(), f.rend());
  return f;
}

// Brute-force level enumeration over a bounding box of quantum numbers.
struct Level {
  double e;
  std::vector<int> n;
};
inline std::vector<Level> brute_force_levels(const std::vector<double>& c,
                                             double e_max) {
  std::vector<Level> out;
  const int m = static_cast<int>(c.size());
  if (m == 0) {
    if (e_max >= 0) out.push_back({0.0, {}});
    return out;
  }
  double cmin = c[0];
  for (double x : c) cmin = std::min(cmin, x);
  const int box = static_cast<int>(e_max / (2.0 * cmin)) + 2;
  std::vector<int> n(m, 0);
  auto rec = [&](auto&& self, int j) -> void {
    if (j == m) {
      double e = 0.0;
      for (int i = 0; i < m; ++i) e += (2.0 * n[i] + 1.0) * c[i];
      if (e <= e_max) out.push_back({e, n});
      return;
    }
    for (int k = 0; k <= box; ++k) {
      n[j] = k;
      self(self, j + 1);
    }
    n[j] = 0;
  };
  rec(rec, 0);
  std::sort(out.begin(), out.end(), [](const Level& a, const Level& b) {
    if (a.e != b.e) return a.e < b.e;
    return a.n < b.n;
  });
  return out;
}

// Gauss-Kronrod-free adaptive Simpson for one-dimensional test integrals.
template <class F>
double simpson(F&& f, double a, double b, int n = 2001) {
  if (n % 2 == 0) ++n;
  const double h = (b - a) / (n - 1);
  double s = f(a) + f(b);
  for (int i = 1; i < n - 1; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Coefficient-space ladder model of the magnetic operators.  On the scaled
// Hermite basis phi_p(t) = h_p(t/s)/sqrt(s):
//   d/dt phi_p = ( sqrt(p/2) phi_{p-1} - sqrt((p+1)/2) phi_{p+1} ) / s,
//   t  * phi_p = s ( sqrt(p/2) phi_{p-1} + sqrt((p+1)/2) phi_{p+1} ),
// exact while all degrees stay below the truncation, and norms are plain
// coefficient l2 norms — no quadrature, no differentiation matrices.  This
// is the reference the value-space library code is compared against.
struct LadderOracle {
  int d = 0;
  std::vector<int> sizes;
  std::vector<Eigen::MatrixXd> deriv, coord, synth;
  Eigen::MatrixXd by;

  explicit LadderOracle(const maglab::LandauContext& ctx) {
    d = ctx.dim();
    by = ctx.by;
    for (int k = 0; k < d; ++k) {
      const maglab::Axis& ax = ctx.grid.axis(k);
      const int nk = static_cast<int>(ax.nodes.size());
      const double s = ax.scale;
      sizes.push_back(nk);
      Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(nk, nk);
      Eigen::MatrixXd mm = Eigen::MatrixXd::Zero(nk, nk);
      for (int p = 0; p < nk; ++p) {
        if (p >= 1) {
          dm(p - 1, p) += std::sqrt(p / 2.0) / s;
          mm(p - 1, p) += s * std::sqrt(p / 2.0);
        }
        if (p + 1 < nk) {
          dm(p + 1, p) -= std::sqrt((p + 1) / 2.0) / s;
          mm(p + 1, p) += s * std::sqrt((p + 1) / 2.0);
        }
      }
      deriv.push_back(dm);
      coord.push_back(mm);
      synth.push_back(maglab::synthesis_matrix(ax, nk));
    }
  }

  // magnetic derivative along grid axis m, acting on coefficients
  maglab::CVec tilde(int m, const maglab::CVec& c) const {
    std::vector<int> dims = sizes;
    maglab::CVec out = maglab::detail::tensor_apply(dims, c, m, deriv[m]);
    out *= maglab::Cplx(0.0, 1.0);
    for (int j = 0; j < d; ++j) {
      const double bmj = by(m, j);
      if (bmj == 0.0) continue;
      std::vector<int> dims2 = sizes;
      out -= (0.5 * bmj) * maglab::detail::tensor_apply(dims2, c, j, coord[j]);
    }
    return out;
  }

  // magnetic derivative along original axis k
  maglab::CVec tilde_x(const maglab::LandauContext& ctx, int k,
                       const maglab::CVec& c) const {
    maglab::CVec out = maglab::CVec::Zero(c.size());
    for (int m = 0; m < d; ++m) {
      const double u = ctx.nf.u(k, m);
      if (u != 0.0) out += u * tilde(m, c);
    }
    return out;
  }

  maglab::CVec hamiltonian(const maglab::CVec& c) const {
    maglab::CVec out = maglab::CVec::Zero(c.size());
    for (int m = 0; m < d; ++m) out += tilde(m, tilde(m, c));
    return out;
  }

  // coefficients -> grid values
  maglab::CVec synthesize(const maglab::CVec& c) const {
    std::vector<int> dims = sizes;
    maglab::CVec v = c;
    for (int k = 0; k < d; ++k)
      v = maglab::detail::tensor_apply(dims, v, k, synth[k]);
    return v;
  }

  // complex-gaussian coefficients supported on per-axis degrees < degmax
  maglab::CVec random_coefficients(int degmax, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::int64_t total = 1;
    for (int nk : sizes) total *= nk;
    maglab::CVec c = maglab::CVec::Zero(total);
    std::vector<int> idx(d, 0);
    for (std::int64_t i = 0; i < total; ++i) {
      bool inside = true;
      for (int k = 0; k < d; ++k) inside = inside && idx[k] < degmax;
      if (inside) {
        const double re = normal(rng);
        const double im = normal(rng);
        c(i) = maglab::Cplx(re, im);
      }
      for (int k = 0; k < d; ++k) {
        if (++idx[k] < sizes[k]) break;
        idx[k] = 0;
      }
    }
    return c / std::sqrt(c.squaredNorm());
  }

  // sum over words of squared coefficient norms, one entry per order
  std::vector<double> bernstein_levels(const maglab::CVec& c,
                                       int m_max) const {
    std::vector<double> acc(m_max + 1, 0.0);
    acc[0] = c.squaredNorm();
    auto rec = [&](auto&& self, const maglab::CVec& g, int depth) -> void {
      for (int k = 0; k < d; ++k) {
        maglab::CVec h = tilde(k, g);
        acc[depth] += h.squaredNorm();
        if (depth < m_max) self(self, h, depth + 1);
      }
    };
    if (m_max > 0) rec(rec, c, 1);
    return acc;
  }
};

}  // namespace oracles
