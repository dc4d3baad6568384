#pragma once
// Sampling geometries for observability experiments: the full space, a
// periodic lattice of spherical holes, axis-aligned stripes, and arbitrary
// bitmaps over a box.  Membership is exact per variant; density over every
// hyperrectangle translate of given side lengths is certified by an
// exhaustive midpoint-voxel scan of one period cell (or of the bitmap box),
// with the discretization error reported alongside the bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "maglab/errors.hpp"
#include "maglab/io.hpp"

namespace maglab {

enum class SetKind { full_space, periodic_holes, stripes, bitmap };

struct SamplingSet {
  SetKind kind = SetKind::full_space;
  int d = 0;
  // periodic_holes: complement is the union of radius-`hole_radius` balls
  // centered on the lattice (hole_period * Z)^d
  double hole_period = 0.0;
  double hole_radius = 0.0;
  // stripes: membership depends on one coordinate modulo stripe_period
  double stripe_period = 0.0;
  double stripe_width = 0.0;
  int stripe_axis = 0;
  // bitmap: voxel grid over [box_lo, box_hi], bit per voxel, row-major
  // (last axis fastest); points outside the box are excluded
  Eigen::VectorXd box_lo, box_hi;
  std::vector<int> resolution;
  std::vector<std::uint8_t> bits;  // one byte per voxel, 0 or 1
};

inline SamplingSet full_space(int d) {
  if (d < 1) throw validation_error("set.d", "dimension must be >= 1");
  SamplingSet s;
  s.kind = SetKind::full_space;
  s.d = d;
  return s;
}

inline SamplingSet periodic_holes(int d, double period, double radius) {
  if (d < 1) throw validation_error("set.d", "dimension must be >= 1");
  if (!(radius > 0.0) || !(period > 2.0 * radius))
    throw validation_error("set.holes",
                           "need period > 2 radius > 0 for disjoint holes");
  SamplingSet s;
  s.kind = SetKind::periodic_holes;
  s.d = d;
  s.hole_period = period;
  s.hole_radius = radius;
  return s;
}

inline SamplingSet stripes(int d, double period, double width, int axis) {
  if (d < 1) throw validation_error("set.d", "dimension must be >= 1");
  if (!(period > 0.0) || !(width > 0.0) || !(width < period))
    throw validation_error("set.stripes", "need 0 < width < period");
  if (axis < 0 || axis >= d)
    throw validation_error("set.stripes", "axis out of range");
  SamplingSet s;
  s.kind = SetKind::stripes;
  s.d = d;
  s.stripe_period = period;
  s.stripe_width = width;
  s.stripe_axis = axis;
  return s;
}

inline SamplingSet bitmap_set(Eigen::VectorXd lo, Eigen::VectorXd hi,
                              std::vector<int> resolution,
                              std::vector<std::uint8_t> bits) {
  const int d = static_cast<int>(lo.size());
  if (d < 1 || hi.size() != d || static_cast<int>(resolution.size()) != d)
    throw validation_error("set.bitmap", "box and resolution rank mismatch");
  std::int64_t total = 1;
  for (int a = 0; a < d; ++a) {
    if (!(hi(a) > lo(a)))
      throw validation_error("set.bitmap", "box must have positive extent");
    if (resolution[a] < 1)
      throw validation_error("set.bitmap", "resolution must be >= 1");
    total *= resolution[a];
  }
  if (static_cast<std::int64_t>(bits.size()) != total)
    throw validation_error("set.bitmap",
                           "bit count must equal the product of resolutions");
  SamplingSet s;
  s.kind = SetKind::bitmap;
  s.d = d;
  s.box_lo = std::move(lo);
  s.box_hi = std::move(hi);
  s.resolution = std::move(resolution);
  s.bits = std::move(bits);
  return s;
}

// Volume of the unit ball in d dimensions.
inline double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// The punctured lattice together with its exact density 1 - w_d (r/L)^d.
inline std::pair<SamplingSet, double> hole_set(double period, double radius,
                                               int d) {
  SamplingSet s = periodic_holes(d, period, radius);
  const double rho =
      1.0 - unit_ball_volume(d) * std::pow(radius / period, double(d));
  return {std::move(s), rho};
}

inline bool contains(const SamplingSet& s, const Eigen::VectorXd& x) {
  if (x.size() != s.d)
    throw validation_error("set.point", "point dimension mismatch");
  switch (s.kind) {
    case SetKind::full_space:
      return true;
    case SetKind::periodic_holes: {
      double dist_sq = 0.0;
      for (int a = 0; a < s.d; ++a) {
        const double m =
            x(a) - s.hole_period * std::round(x(a) / s.hole_period);
        dist_sq += m * m;
      }
      return dist_sq >= s.hole_radius * s.hole_radius;
    }
    case SetKind::stripes: {
      const double t =
          x(s.stripe_axis) -
          s.stripe_period * std::floor(x(s.stripe_axis) / s.stripe_period);
      return t < s.stripe_width;
    }
    case SetKind::bitmap: {
      std::int64_t flat = 0;
      for (int a = 0; a < s.d; ++a) {
        const double h = (s.box_hi(a) - s.box_lo(a)) / s.resolution[a];
        const double rel = (x(a) - s.box_lo(a)) / h;
        const int i = static_cast<int>(std::floor(rel));
        if (i < 0 || i >= s.resolution[a]) return false;
        flat = flat * s.resolution[a] + i;
      }
      return s.bits[flat] != 0;
    }
  }
  return false;
}

inline std::vector<std::uint8_t> indicator(const SamplingSet& s,
                                           const Eigen::MatrixXd& points) {
  std::vector<std::uint8_t> out(points.rows());
  for (Eigen::Index r = 0; r < points.rows(); ++r)
    out[r] = contains(s, points.row(r).transpose()) ? 1 : 0;
  return out;
}

struct ThicknessCertificate {
  Eigen::VectorXd l;               // rectangle side lengths
  double rho_lower = 1.0;          // min density over scanned translates
  Eigen::VectorXd worst_translate;  // rectangle corner achieving the min
  std::string method;              // exact | exhaustive-by-periodicity |
                                   // exhaustive-in-box
  double discretization = 0.0;     // reported O(1/resolution) error bound
};

namespace detail {

// d-dimensional exclusive prefix sums (axis 0 fastest), then O(2^d)
// rectangle queries by inclusion-exclusion.
class PrefixSums {
 public:
  PrefixSums(const std::vector<int>& ext, const std::vector<double>& cells)
      : ext_(ext) {
    const int d = static_cast<int>(ext.size());
    std::int64_t total = 1;
    strides_.resize(d);
    for (int a = 0; a < d; ++a) {
      strides_[a] = total;
      total *= ext[a] + 1;
    }
    table_.assign(total, 0.0);
    // scatter the cell values at index + 1 per axis
    std::vector<int> idx(d, 0);
    std::int64_t cells_total = 1;
    for (int a = 0; a < d; ++a) cells_total *= ext[a];
    for (std::int64_t c = 0; c < cells_total; ++c) {
      std::int64_t at = 0;
      for (int a = 0; a < d; ++a) at += (idx[a] + 1) * strides_[a];
      table_[at] = cells[c];
      for (int a = 0; a < d; ++a) {
        if (++idx[a] <= ext[a] - 1) break;
        idx[a] = 0;
      }
    }
    // running sums along each axis
    for (int a = 0; a < d; ++a) {
      std::vector<int> j(d, 0);
      std::vector<int> lim(d);
      for (int b = 0; b < d; ++b) lim[b] = ext[b] + 1;
      lim[a] = 1;  // walk lines along axis a
      std::int64_t lines = 1;
      for (int b = 0; b < d; ++b) lines *= lim[b];
      for (std::int64_t line = 0; line < lines; ++line) {
        std::int64_t base = 0;
        for (int b = 0; b < d; ++b) base += j[b] * strides_[b];
        for (int i = 1; i <= ext[a]; ++i)
          table_[base + i * strides_[a]] += table_[base + (i - 1) * strides_[a]];
        for (int b = 0; b < d; ++b) {
          if (++j[b] < lim[b]) break;
          j[b] = 0;
        }
      }
    }
  }

  // Sum of cells in [lo, lo + len) componentwise.
  double window(const std::vector<int>& lo, const std::vector<int>& len) const {
    const int d = static_cast<int>(ext_.size());
    double sum = 0.0;
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
      std::int64_t at = 0;
      int bits = 0;
      for (int a = 0; a < d; ++a) {
        const bool high = corner & (1u << a);
        at += (lo[a] + (high ? len[a] : 0)) * strides_[a];
        bits += high ? 1 : 0;
      }
      sum += ((d - bits) % 2 == 0 ? 1.0 : -1.0) * table_[at];
    }
    return sum;
  }

 private:
  std::vector<int> ext_;
  std::vector<std::int64_t> strides_;
  std::vector<double> table_;
};

inline bool lex_less_vec(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

}  // namespace detail

// Certified lower bound on inf_t Vol(S cap (t + [0, l])) / Vol([0, l]).
// Periodic variants are scanned exhaustively over one period cell at
// `resolution` translates per periodic axis; bitmaps over every in-box
// translate.  Ties pick the lexicographically smallest translate.
inline ThicknessCertificate thickness_estimate(const SamplingSet& s,
                                               const Eigen::VectorXd& l,
                                               int resolution) {
  if (l.size() != s.d)
    throw validation_error("thickness.l", "side count must equal dim");
  for (int a = 0; a < s.d; ++a)
    if (!(l(a) > 0.0) || !std::isfinite(l(a)))
      throw validation_error("thickness.l", "sides must be positive finite");
  if (resolution < 2)
    throw validation_error("thickness.resolution", "resolution must be >= 2");

  ThicknessCertificate cert;
  cert.l = l;
  cert.worst_translate = Eigen::VectorXd::Zero(s.d);

  if (s.kind == SetKind::full_space) {
    cert.rho_lower = 1.0;
    cert.method = "exact";
    return cert;
  }

  if (s.kind == SetKind::stripes) {
    // only the striped axis matters; scan the one-dimensional problem
    const double period = s.stripe_period;
    const double h = period / resolution;
    const int m = std::max(1, int(std::llround(l(s.stripe_axis) / h)));
    std::vector<double> cells(resolution + m);
    for (int i = 0; i < resolution + m; ++i) {
      const double c = (i + 0.5) * h;
      const double t = c - period * std::floor(c / period);
      cells[i] = t < s.stripe_width ? 1.0 : 0.0;
    }
    double best = 2.0;
    int best_o = 0;
    for (int o = 0; o < resolution; ++o) {
      double count = 0.0;
      for (int i = 0; i < m; ++i) count += cells[o + i];
      const double rho = count / m;
      if (rho < best) best = rho, best_o = o;
    }
    cert.rho_lower = best;
    cert.worst_translate(s.stripe_axis) = best_o * h;
    cert.method = "exhaustive-by-periodicity";
    cert.discretization = 2.0 / m + 2.0 / resolution;
    return cert;
  }

  // voxel geometry: periodic holes tile one period cell; bitmaps use their box
  const bool periodic = s.kind == SetKind::periodic_holes;
  std::vector<int> scan(s.d);     // translates per axis
  std::vector<int> m(s.d);        // window voxels per axis
  std::vector<int> ext(s.d);      // master cell voxels per axis
  std::vector<double> h(s.d), origin(s.d);
  for (int a = 0; a < s.d; ++a) {
    if (periodic) {
      h[a] = s.hole_period / resolution;
      m[a] = std::max(1, int(std::llround(l(a) / h[a])));
      scan[a] = resolution;
      ext[a] = resolution + m[a];  // tiled so every window fits
      origin[a] = 0.0;
    } else {
      h[a] = (s.box_hi(a) - s.box_lo(a)) / s.resolution[a];
      m[a] = std::max(1, int(std::llround(l(a) / h[a])));
      if (m[a] > s.resolution[a])
        throw validation_error("thickness.box",
                               "bitmap box is smaller than the rectangle");
      scan[a] = s.resolution[a] - m[a] + 1;
      ext[a] = s.resolution[a];
      origin[a] = s.box_lo(a);
    }
  }

  std::int64_t cells_total = 1;
  for (int a = 0; a < s.d; ++a) cells_total *= ext[a];
  std::vector<double> cells(cells_total);
  {
    std::vector<int> idx(s.d, 0);
    Eigen::VectorXd center(s.d);
    for (std::int64_t c = 0; c < cells_total; ++c) {
      if (periodic) {
        for (int a = 0; a < s.d; ++a)
          center(a) = (idx[a] + 0.5) * h[a];
        cells[c] = contains(s, center) ? 1.0 : 0.0;
      } else {
        std::int64_t flat = 0;  // row-major bit order
        for (int a = 0; a < s.d; ++a) flat = flat * s.resolution[a] + idx[a];
        cells[c] = s.bits[flat] != 0 ? 1.0 : 0.0;
      }
      for (int a = 0; a < s.d; ++a) {
        if (++idx[a] < ext[a]) break;
        idx[a] = 0;
      }
    }
  }
  const detail::PrefixSums prefix(ext, cells);

  double window_cells = 1.0;
  for (int a = 0; a < s.d; ++a) window_cells *= m[a];
  double best = 2.0;
  Eigen::VectorXd best_t(s.d);
  std::vector<int> o(s.d, 0);
  std::int64_t scans = 1;
  for (int a = 0; a < s.d; ++a) scans *= scan[a];
  Eigen::VectorXd t(s.d);
  for (std::int64_t k = 0; k < scans; ++k) {
    const double rho = prefix.window(o, m) / window_cells;
    for (int a = 0; a < s.d; ++a) t(a) = origin[a] + o[a] * h[a];
    if (rho < best || (rho == best && detail::lex_less_vec(t, best_t))) {
      best = rho;
      best_t = t;
    }
    for (int a = 0; a < s.d; ++a) {
      if (++o[a] < scan[a]) break;
      o[a] = 0;
    }
  }
  cert.rho_lower = std::min(1.0, std::max(0.0, best));
  cert.worst_translate = best_t;
  cert.method = periodic ? "exhaustive-by-periodicity" : "exhaustive-in-box";
  double disc = 0.0;
  for (int a = 0; a < s.d; ++a) disc += 2.0 / m[a];
  if (periodic) disc += 2.0 * s.d / resolution;
  cert.discretization = disc;
  return cert;
}

// ---- JSON -------------------------------------------------------------------

inline nlohmann::json to_json(const SamplingSet& s) {
  nlohmann::json j;
  j["d"] = s.d;
  switch (s.kind) {
    case SetKind::full_space:
      j["variant"] = "full_space";
      break;
    case SetKind::periodic_holes:
      j["variant"] = "periodic_holes";
      j["period"] = s.hole_period;
      j["radius"] = s.hole_radius;
      break;
    case SetKind::stripes:
      j["variant"] = "stripes";
      j["period"] = s.stripe_period;
      j["width"] = s.stripe_width;
      j["axis"] = s.stripe_axis;
      break;
    case SetKind::bitmap: {
      j["variant"] = "bitmap";
      j["box_lo"] = std::vector<double>(s.box_lo.data(),
                                        s.box_lo.data() + s.box_lo.size());
      j["box_hi"] = std::vector<double>(s.box_hi.data(),
                                        s.box_hi.data() + s.box_hi.size());
      j["resolution"] = s.resolution;
      std::vector<std::uint8_t> packed((s.bits.size() + 7) / 8, 0);
      for (std::size_t i = 0; i < s.bits.size(); ++i)
        if (s.bits[i]) packed[i / 8] |= std::uint8_t(1u << (7 - i % 8));
      j["bits"] = base64_encode(packed);
      break;
    }
  }
  return j;
}

inline SamplingSet set_from_json(const nlohmann::json& j) {
  const std::string variant = j.at("variant").get<std::string>();
  const int d = j.at("d").get<int>();
  if (variant == "full_space") return full_space(d);
  if (variant == "periodic_holes")
    return periodic_holes(d, j.at("period").get<double>(),
                          j.at("radius").get<double>());
  if (variant == "stripes")
    return stripes(d, j.at("period").get<double>(),
                   j.at("width").get<double>(), j.at("axis").get<int>());
  if (variant == "bitmap") {
    const auto lo = j.at("box_lo").get<std::vector<double>>();
    const auto hi = j.at("box_hi").get<std::vector<double>>();
    const auto res = j.at("resolution").get<std::vector<int>>();
    std::int64_t total = 1;
    for (int r : res) total *= r;
    const std::vector<std::uint8_t> packed =
        base64_decode(j.at("bits").get<std::string>());
    if (static_cast<std::int64_t>(packed.size()) != (total + 7) / 8)
      throw validation_error("set.bitmap", "bit stream length mismatch");
    std::vector<std::uint8_t> bits(total, 0);
    for (std::int64_t i = 0; i < total; ++i)
      bits[i] = (packed[i / 8] >> (7 - i % 8)) & 1u;
    return bitmap_set(
        Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size()),
        Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size()), res,
        std::move(bits));
  }
  throw validation_error("set.variant", "unknown variant '" + variant + "'");
}

inline nlohmann::json to_json(const ThicknessCertificate& c) {
  nlohmann::json j;
  j["l"] = std::vector<double>(c.l.data(), c.l.data() + c.l.size());
  j["rho_lower"] = c.rho_lower;
  j["worst_translate"] = std::vector<double>(
      c.worst_translate.data(),
      c.worst_translate.data() + c.worst_translate.size());
  j["method"] = c.method;
  j["discretization"] = c.discretization;
  return j;
}

}  // namespace maglab
