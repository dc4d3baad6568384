#pragma once
#include <nlohmann/json.hpp>

namespace maglab {

// Central tolerance table.  The first block is user-tunable via the CLI
// --tolerances file; the second block holds fixed internal thresholds that
// define the library's contracts (kept here so every magic number has one
// home).  All values are relative unless noted.
struct Tolerances {
  // -- tunable -------------------------------------------------------------
  double eta_orth = 1e-8;   // basis Gram deviation from identity (max entry)
  double eta_eig  = 1e-6;   // eigen-residual ||H f - E f|| / ||f||
  double eta_bern = 1e-4;   // slack on derivative-sum inequality ratios
  double eta_ctrl = 1e-8;   // final-state norm after control, rel. to ||u0||
  double eta_leak = 1e-2;   // tolerated spectral leakage of windowed modes

  // -- fixed contracts -----------------------------------------------------
  static constexpr double normal_form_reconstruction = 1e-10;  // |U^T B U - C|
  static constexpr double u_orthogonality   = 1e-12;  // |U^T U - Id| max entry
  static constexpr double freq_truncation   = 1e-12;  // * op_norm, to zero
  static constexpr double commutator        = 1e-7;   // mixed-derivative residual
  static constexpr double self_adjointness  = 1e-8;   // <f,Hg> vs <Hf,g>
  static constexpr double nonnegativity     = -1e-10; // lower bound on <f,Hf>
  static constexpr double semigroup         = 1e-15;  // propagator composition
  static constexpr double gauge_covariance  = 1e-6;   // translated-set identity
  static constexpr double gram_floor        = 1e-12;  // Gramian lambda_min guard
  static constexpr double dual_route        = 1e-6;   // two-route agreement
  static constexpr double resolution_tail   = 1e-12;  // top-coefficient mass cap

  void load_overrides(const nlohmann::json& j);
};

inline void Tolerances::load_overrides(const nlohmann::json& j) {
  if (j.contains("eta_orth")) eta_orth = j.at("eta_orth").get<double>();
  if (j.contains("eta_eig"))  eta_eig  = j.at("eta_eig").get<double>();
  if (j.contains("eta_bern")) eta_bern = j.at("eta_bern").get<double>();
  if (j.contains("eta_ctrl")) eta_ctrl = j.at("eta_ctrl").get<double>();
  if (j.contains("eta_leak")) eta_leak = j.at("eta_leak").get<double>();
}

}  // namespace maglab
