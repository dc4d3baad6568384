#pragma once
// Tensor-product Gauss-Hermite grids adapted to a field's block frequencies.
//
// Every function handled on such a grid lives in the "Gaussian class" of the
// grid: along axis k with scale s_k it is  p(t/s_k) exp(-t^2/(2 s_k^2))  with
// deg p < n_k.  Quadrature (reciprocal Christoffel weights), differentiation
// (barycentric), and off-grid evaluation are all exact on that class up to
// rounding, so downstream identities can be tested at 1e-10 instead of being
// smeared by discretization error.
//
// Storage order: axis 0 varies fastest (column-major over axes).

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "maglab/errors.hpp"
#include "maglab/field.hpp"
#include "maglab/quadrature.hpp"

namespace maglab {

using Cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;

// One grid axis: scaled Gauss-Hermite nodes with quadrature weights valid for
// pairwise products of class functions, plus the exact differentiation matrix.
struct Axis {
  Eigen::VectorXd nodes;    // ascending, = scale * (unit GH nodes)
  Eigen::VectorXd weights;  // int f conj(g) dt = sum_i w_i f_i conj(g_i)
  Eigen::MatrixXd diff;     // (D f)_i = f'(nodes_i) for class functions
  double scale = 1.0;
};

inline Axis make_axis(int n, double scale) {
  if (n < 1) throw validation_error("grid.nodes", "need at least one node");
  if (!(scale > 0.0))
    throw validation_error("grid.scale", "axis scale must be positive");
  const Rule1d unit = gauss_hermite(n);
  Axis ax;
  ax.scale = scale;
  ax.nodes = scale * unit.nodes;
  // w_i = scale / sum_p h_p(x_i)^2 reproduces the Gauss-Hermite weights
  // without forming exp(x_i^2), which overflows past ~38 nodes.
  ax.weights = scale * christoffel_weights(unit.nodes, n);
  ax.diff = gaussian_diff_matrix(unit.nodes) / scale;
  return ax;
}

namespace detail {

// Apply a 1-d operator a (n_out x n_in) along axis k of the tensor f whose
// axis sizes are dims (axis 0 fastest).  dims is updated to the output shape.
// Complex data is viewed as real pairs so the per-pane product is a plain
// real GEMM: pane (2*inner x n_in) times a^T.
inline CVec tensor_apply(std::vector<int>& dims, const CVec& f, int k,
                         const Eigen::MatrixXd& a) {
  const int rank = static_cast<int>(dims.size());
  if (k < 0 || k >= rank)
    throw invariant_error("grid.apply.axis", "axis index out of range");
  std::int64_t inner = 1, outer = 1;
  for (int i = 0; i < k; ++i) inner *= dims[i];
  for (int i = k + 1; i < rank; ++i) outer *= dims[i];
  const int n_in = dims[k];
  const int n_out = static_cast<int>(a.rows());
  if (static_cast<int>(a.cols()) != n_in)
    throw invariant_error("grid.apply.shape",
                          "operator columns do not match axis size");
  if (f.size() != inner * n_in * outer)
    throw invariant_error("grid.apply.size",
                          "flat data does not match axis sizes");
  CVec out(inner * n_out * outer);
  const auto* src = reinterpret_cast<const double*>(f.data());
  auto* dst = reinterpret_cast<double*>(out.data());
  const std::int64_t in_pane = 2 * inner * n_in;
  const std::int64_t out_pane = 2 * inner * n_out;
  for (std::int64_t o = 0; o < outer; ++o) {
    Eigen::Map<const Eigen::MatrixXd> pin(src + o * in_pane, 2 * inner, n_in);
    Eigen::Map<Eigen::MatrixXd> pout(dst + o * out_pane, 2 * inner, n_out);
    pout.noalias() = pin * a.transpose();
  }
  dims[k] = n_out;
  return out;
}

}  // namespace detail

// d-dimensional tensor grid.  Functions are flat complex vectors of length
// prod(extents()), axis 0 fastest.
class TensorGrid {
 public:
  TensorGrid(const std::vector<int>& sizes, const std::vector<double>& scales) {
    if (sizes.empty())
      throw validation_error("grid.sizes", "need at least one axis");
    if (sizes.size() != scales.size())
      throw validation_error("grid.scales",
                             "one scale per axis is required");
    axes_.reserve(sizes.size());
    for (std::size_t k = 0; k < sizes.size(); ++k)
      axes_.push_back(make_axis(sizes[k], scales[k]));
    build_cache();
  }

  int rank() const { return static_cast<int>(axes_.size()); }
  const Axis& axis(int k) const { return axes_.at(k); }
  std::int64_t size() const { return total_; }

  std::vector<int> extents() const {
    std::vector<int> e(axes_.size());
    for (std::size_t k = 0; k < axes_.size(); ++k)
      e[k] = static_cast<int>(axes_[k].nodes.size());
    return e;
  }

  // Apply a square per-axis operator (e.g. the differentiation matrix).
  CVec apply_axis(int k, const Eigen::MatrixXd& a, const CVec& f) const {
    if (a.rows() != a.cols())
      throw invariant_error("grid.apply.square",
                            "in-place axis operator must be square");
    std::vector<int> dims = extents();
    return detail::tensor_apply(dims, f, k, a);
  }

  // Flat vector of tensor-product quadrature weights.
  const Eigen::VectorXd& weights() const { return weights_; }

  // Flat vector of the k-th coordinate of every node.
  const Eigen::VectorXd& coordinate(int k) const { return coords_.at(k); }

  // <f, g> = sum_i w_i conj(f_i) g_i, accumulated in index order so results
  // are bit-for-bit reproducible.
  Cplx inner(const CVec& f, const CVec& g) const {
    check_size(f, "grid.inner.lhs");
    check_size(g, "grid.inner.rhs");
    Cplx acc(0.0, 0.0);
    for (std::int64_t i = 0; i < total_; ++i)
      acc += weights_(i) * std::conj(f(i)) * g(i);
    return acc;
  }

  double norm_sq(const CVec& f) const {
    check_size(f, "grid.norm.arg");
    double acc = 0.0;
    for (std::int64_t i = 0; i < total_; ++i)
      acc += weights_(i) * std::norm(f(i));
    return acc;
  }

  // int |f| over the grid's Gaussian measure support (whole space for class
  // functions; exact up to the kink of |.| at zeros of f).
  double weighted_l1(const CVec& f) const {
    check_size(f, "grid.l1.arg");
    double acc = 0.0;
    for (std::int64_t i = 0; i < total_; ++i)
      acc += weights_(i) * std::abs(f(i));
    return acc;
  }

 private:
  void check_size(const CVec& f, const char* id) const {
    if (f.size() != total_)
      throw invariant_error(id, "flat data does not match the grid size");
  }

  void build_cache() {
    total_ = 1;
    for (const Axis& ax : axes_) total_ *= ax.nodes.size();
    weights_.resize(total_);
    coords_.assign(axes_.size(), Eigen::VectorXd(total_));
    std::vector<int> idx(axes_.size(), 0);
    for (std::int64_t i = 0; i < total_; ++i) {
      double w = 1.0;
      for (std::size_t k = 0; k < axes_.size(); ++k) {
        w *= axes_[k].weights(idx[k]);
        coords_[k](i) = axes_[k].nodes(idx[k]);
      }
      weights_(i) = w;
      for (std::size_t k = 0; k < axes_.size(); ++k) {
        if (++idx[k] < axes_[k].nodes.size()) break;
        idx[k] = 0;
      }
    }
  }

  std::vector<Axis> axes_;
  Eigen::VectorXd weights_;
  std::vector<Eigen::VectorXd> coords_;
  std::int64_t total_ = 0;
};

// Grid adapted to a normal form: in block coordinates, axis 2j and 2j+1 get
// scale sqrt(2/C_j) so the block's bound states are class functions exactly;
// axes in the kernel of the field get the caller's scale (they carry windowed
// wave packets, not bound states).
inline TensorGrid make_adapted_grid(const BlockNormalForm& nf,
                                    int nodes_per_axis, double sigma_null) {
  if (nodes_per_axis < 2)
    throw validation_error("grid.nodes_per_axis", "need at least two nodes");
  if (nf.nullity > 0 && !(sigma_null > 0.0))
    throw validation_error("grid.sigma_null",
                           "null-direction scale must be positive");
  std::vector<int> sizes(nf.dim(), nodes_per_axis);
  std::vector<double> scales;
  scales.reserve(nf.dim());
  for (int j = 0; j < nf.block_count(); ++j) {
    const double s = std::sqrt(2.0 / nf.frequencies[j]);
    scales.push_back(s);
    scales.push_back(s);
  }
  for (int j = 0; j < nf.nullity; ++j) scales.push_back(sigma_null);
  return TensorGrid(sizes, scales);
}

// S(i,p) = h_p(nodes_i / s) / sqrt(s): values of the orthonormal scaled
// Hermite functions at the axis nodes.  Columns are an orthonormal family
// under the axis weights as long as p_count <= #nodes.
inline Eigen::MatrixXd synthesis_matrix(const Axis& ax, int p_count) {
  if (p_count < 1 || p_count > ax.nodes.size())
    throw invariant_error("grid.synthesis.count",
                          "need 1 <= p_count <= node count");
  Eigen::MatrixXd s =
      hermite_synthesis(ax.nodes / ax.scale, p_count - 1) / std::sqrt(ax.scale);
  return s;
}

// A(p,i) with  c = A f  the coefficients of a class function: A = S^T diag(w).
inline Eigen::MatrixXd analysis_matrix(const Axis& ax, int p_count) {
  return synthesis_matrix(ax, p_count).transpose() *
         ax.weights.asDiagonal();
}

// Worst per-axis relative weight of the top `guard` Hermite coefficients.
// Small values certify that f is resolved: applying a further derivative or
// coordinate multiplication stays inside the representable class.
inline double coefficient_tail(const TensorGrid& grid, const CVec& f,
                               int guard) {
  const double total = grid.norm_sq(f);
  if (total <= 0.0) return 0.0;
  double worst = 0.0;
  for (int k = 0; k < grid.rank(); ++k) {
    const int n = static_cast<int>(grid.axis(k).nodes.size());
    const int g = std::min(guard, n);
    std::vector<int> dims = grid.extents();
    const CVec coef =
        detail::tensor_apply(dims, f, k, analysis_matrix(grid.axis(k), n));
    // sum |c|^2 over flat indices whose axis-k digit is in the top g rows,
    // weighting the remaining axes by quadrature as in norm_sq.
    std::int64_t inner = 1;
    for (int i = 0; i < k; ++i) inner *= dims[i];
    std::int64_t outer = 1;
    for (int i = k + 1; i < grid.rank(); ++i) outer *= dims[i];
    double tail = 0.0;
    for (std::int64_t o = 0; o < outer; ++o)
      for (int p = n - g; p < n; ++p)
        for (std::int64_t i = 0; i < inner; ++i) {
          const std::int64_t flat = (o * n + p) * inner + i;
          double w = 1.0;  // cross-axis quadrature weight, axis k excluded
          std::int64_t rem = i;
          for (int a = 0; a < k; ++a) {
            const int na = static_cast<int>(grid.axis(a).nodes.size());
            w *= grid.axis(a).weights(static_cast<int>(rem % na));
            rem /= na;
          }
          rem = o;
          for (int a = k + 1; a < grid.rank(); ++a) {
            const int na = static_cast<int>(grid.axis(a).nodes.size());
            w *= grid.axis(a).weights(static_cast<int>(rem % na));
            rem /= na;
          }
          tail += w * std::norm(coef(flat));
        }
    worst = std::max(worst, tail / total);
  }
  return worst;
}

namespace detail {

// Deterministic standard-normal stream: 53-bit uniforms from mt19937_64
// fed through Box-Muller.  Fixed here (not std::normal_distribution) so the
// values are identical across standard libraries.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    const double u1 = ((rng_() >> 11) + 1) * 0x1.0p-53;  // in (0,1]
    const double u2 = (rng_() >> 11) * 0x1.0p-53;        // in [0,1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_ = false;
};

}  // namespace detail

// Random normalized function in the grid's Gaussian class with per-axis
// Hermite degree < max_degree: complex standard-normal coefficients, fixed
// seed => identical grid values on every platform.
inline CVec random_class_function(const TensorGrid& grid, int max_degree,
                                  std::uint64_t seed) {
  if (max_degree < 1)
    throw validation_error("grid.max_degree", "need at least degree one");
  detail::NormalSampler normal(seed);
  std::vector<int> dims(grid.rank(), max_degree);
  std::int64_t count = 1;
  for (int k = 0; k < grid.rank(); ++k) {
    if (max_degree > grid.axis(k).nodes.size())
      throw validation_error("grid.max_degree",
                             "degree exceeds axis node count");
    count *= max_degree;
  }
  CVec coef(count);
  for (std::int64_t i = 0; i < count; ++i) {
    const double re = normal();
    const double im = normal();
    coef(i) = Cplx(re, im);
  }
  CVec f = coef;
  for (int k = 0; k < grid.rank(); ++k)
    f = detail::tensor_apply(dims, f, k,
                             synthesis_matrix(grid.axis(k), max_degree));
  const double nrm = std::sqrt(grid.norm_sq(f));
  if (!(nrm > 0.0))
    throw invariant_error("grid.random.norm", "sampled function vanished");
  return f / nrm;
}

}  // namespace maglab
