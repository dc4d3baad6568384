#pragma once
// One-dimensional building blocks for the tensor grids: Gauss-Hermite and
// Gauss-Legendre rules (Golub-Welsch), normalized Hermite function synthesis,
// and barycentric differentiation / off-grid evaluation for the
// polynomial-times-Gaussian class  p(x) exp(-x^2/2),  deg p < #nodes.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "maglab/errors.hpp"

namespace maglab {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

struct Rule1d {
  Eigen::VectorXd nodes;    // ascending
  Eigen::VectorXd weights;  // positive
};

namespace detail {
// Nodes/weights of the rule with Jacobi off-diagonals b_k and zeroth moment mu0.
inline Rule1d golub_welsch(const Eigen::VectorXd& offdiag, double mu0) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) {
    jac(k, k + 1) = offdiag(k);
    jac(k + 1, k) = offdiag(k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  Rule1d r;
  r.nodes = es.eigenvalues();
  r.weights = mu0 * es.eigenvectors().row(0).array().square();
  return r;
}
}  // namespace detail

// Rule for  int f(x) exp(-x^2) dx.
inline Rule1d gauss_hermite(int n) {
  if (n < 1) throw validation_error("quadrature.n", "need at least one node");
  Eigen::VectorXd b(n - 1);
  for (int k = 1; k < n; ++k) b(k - 1) = std::sqrt(k / 2.0);
  Rule1d r = detail::golub_welsch(b, std::sqrt(kPi));
  // enforce exact symmetry of the rule, which holds analytically
  const int h = n / 2;
  for (int i = 0; i < h; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (r.nodes(j) - r.nodes(i));
    const double w = 0.5 * (r.weights(i) + r.weights(j));
    r.nodes(i) = -x;
    r.nodes(j) = x;
    r.weights(i) = r.weights(j) = w;
  }
  if (n % 2 == 1) r.nodes(h) = 0.0;
  return r;
}

// Rule for  int_{-1}^{1} f(x) dx,  and the affine image on [a,b].
inline Rule1d gauss_legendre(int n) {
  if (n < 1) throw validation_error("quadrature.n", "need at least one node");
  Eigen::VectorXd b(n - 1);
  for (int k = 1; k < n; ++k) b(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return detail::golub_welsch(b, 2.0);
}

inline Rule1d gauss_legendre(int n, double a, double b) {
  Rule1d r = gauss_legendre(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  r.nodes = (mid + (half * r.nodes.array())).matrix();
  r.weights *= half;
  return r;
}

// Column (h_0(x), ..., h_{pmax}(x)) of L^2-normalized Hermite functions,
// h_0(x) = pi^{-1/4} exp(-x^2/2),  x h_p = sqrt((p+1)/2) h_{p+1} + sqrt(p/2) h_{p-1}.
inline Eigen::VectorXd hermite_functions(int pmax, double x) {
  Eigen::VectorXd h(pmax + 1);
  h(0) = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
  if (pmax >= 1) h(1) = std::sqrt(2.0) * x * h(0);
  for (int p = 1; p < pmax; ++p)
    h(p + 1) = std::sqrt(2.0 / (p + 1)) * x * h(p) -
               std::sqrt(double(p) / (p + 1)) * h(p - 1);
  return h;
}

// Synthesis matrix  S(i,p) = h_p(x_i).
inline Eigen::MatrixXd hermite_synthesis(const Eigen::VectorXd& x, int pmax) {
  Eigen::MatrixXd s(x.size(), pmax + 1);
  for (int i = 0; i < x.size(); ++i) s.row(i) = hermite_functions(pmax, x(i));
  return s;
}

// Quadrature weights for  int f(x) conj(g(x)) dx  with f,g in the Hermite
// function class spanned by {h_0..h_{p_count-1}}: the reciprocal Christoffel
// function  1 / sum_p h_p(x_i)^2  evaluated at the (possibly truncated) nodes.
inline Eigen::VectorXd christoffel_weights(const Eigen::VectorXd& nodes,
                                           int p_count) {
  Eigen::VectorXd w(nodes.size());
  for (int i = 0; i < nodes.size(); ++i)
    w(i) = 1.0 / hermite_functions(p_count - 1, nodes(i)).squaredNorm();
  return w;
}

// Expansion of exp(i k x) h_0(x) over h_p:  c_p = e^{-k^2/4} (ik/sqrt2)^p / sqrt(p!).
inline Eigen::VectorXcd coherent_coefficients(double k, int pmax) {
  Eigen::VectorXcd c(pmax + 1);
  c(0) = std::exp(-0.25 * k * k);
  const std::complex<double> step(0.0, k / std::sqrt(2.0));
  for (int p = 0; p < pmax; ++p) c(p + 1) = c(p) * step / std::sqrt(p + 1.0);
  return c;
}

namespace detail {
struct BaryData {
  Eigen::VectorXd logw;  // log |barycentric weight|
  Eigen::VectorXd sign;  // its sign
};

inline BaryData barycentric_weights(const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  BaryData bd{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int k = 0; k < n; ++k)
      if (k != j) s += std::log(std::abs(x(j) - x(k)));
    bd.logw(j) = -s;
    bd.sign(j) = ((n - 1 - j) % 2 == 0) ? 1.0 : -1.0;  // nodes ascending
  }
  return bd;
}
}  // namespace detail

// Differentiation matrix exact on  p(x) exp(-x^2/2),  deg p < #nodes.
inline Eigen::MatrixXd gaussian_diff_matrix(const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  const auto bd = detail::barycentric_weights(x);
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i) {
    double diag = -x(i);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      diag += 1.0 / (x(i) - x(j));
      const double ex =
          bd.logw(j) - bd.logw(i) + 0.5 * (x(j) * x(j) - x(i) * x(i));
      d(i, j) = bd.sign(i) * bd.sign(j) * std::exp(ex) / (x(i) - x(j));
    }
    d(i, i) = diag;
  }
  return d;
}

namespace detail {
inline Eigen::VectorXd gaussian_eval_row(const Eigen::VectorXd& x,
                                         const BaryData& bd, double t) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  double logsum = 0.0, sgn = 1.0;
  for (int j = 0; j < n; ++j) {
    const double dt = t - x(j);
    if (std::abs(dt) < 1e-13) {  // on a node
      e(j) = 1.0;
      return e;
    }
    logsum += std::log(std::abs(dt));
    if (dt < 0) sgn = -sgn;
  }
  for (int j = 0; j < n; ++j) {
    const double dt = t - x(j);
    const double ex = logsum - std::log(std::abs(dt)) + bd.logw(j) +
                      0.5 * (x(j) * x(j) - t * t);
    if (ex < -745.0) continue;  // underflow: far outside the hull
    e(j) = sgn * (dt < 0 ? -1.0 : 1.0) * bd.sign(j) * std::exp(ex);
  }
  return e;
}
}  // namespace detail

// Row vector e with  sum_j e_j f(x_j) = f(t)  for f in the class above.
inline Eigen::VectorXd gaussian_eval_row(const Eigen::VectorXd& x, double t) {
  return detail::gaussian_eval_row(x, detail::barycentric_weights(x), t);
}

// Same rows for many points at once:  E(i,j), f(t_i) = sum_j E(i,j) f(x_j).
inline Eigen::MatrixXd gaussian_eval_matrix(const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& t) {
  const auto bd = detail::barycentric_weights(x);
  Eigen::MatrixXd e(t.size(), x.size());
  for (int i = 0; i < t.size(); ++i)
    e.row(i) = detail::gaussian_eval_row(x, bd, t(i));
  return e;
}

}  // namespace maglab
