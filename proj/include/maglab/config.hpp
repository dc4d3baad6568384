#pragma once

// Strict JSON configuration schema for the command-line laboratory.  Every
// command has an exact key set; unknown keys are rejected with their dotted
// path, and commands that draw randomness refuse to run without a seed.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maglab/errors.hpp"
#include "maglab/field.hpp"
#include "maglab/thickset.hpp"
#include "maglab/tolerances.hpp"

namespace maglab {

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& path,
                       const std::set<std::string>& required,
                       const std::set<std::string>& optional = {}) {
  if (!j.is_object())
    throw validation_error(path, "expected an object");
  for (const auto& item : j.items())
    if (!required.count(item.key()) && !optional.count(item.key()))
      throw validation_error(path + "." + item.key(), "unknown key");
  for (const std::string& key : required)
    if (!j.contains(key))
      throw validation_error(path + "." + key, "missing required key");
}

inline double get_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw validation_error(path, "expected a number");
  return j.get<double>();
}

inline double get_positive(const nlohmann::json& j, const std::string& path) {
  const double v = get_number(j, path);
  if (!(v > 0.0)) throw validation_error(path, "expected a positive number");
  return v;
}

inline int get_int(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_integer())
    throw validation_error(path, "expected an integer");
  return j.get<int>();
}

inline bool get_bool(const nlohmann::json& j, const std::string& path) {
  if (!j.is_boolean()) throw validation_error(path, "expected a boolean");
  return j.get<bool>();
}

inline std::string get_string(const nlohmann::json& j,
                              const std::string& path) {
  if (!j.is_string()) throw validation_error(path, "expected a string");
  return j.get<std::string>();
}

inline std::uint64_t get_seed(const nlohmann::json& j,
                              const std::string& path) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() &&
                                 j.get<std::int64_t>() < 0))
    throw validation_error(path, "expected a nonnegative integer seed");
  return j.get<std::uint64_t>();
}

}  // namespace detail

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j,
                                        const std::string& path) {
  if (!j.is_array() || j.empty())
    throw validation_error(path, "expected a non-empty array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw validation_error(path + "[" + std::to_string(i) + "]",
                             "expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd matrix_rows_from_json(const nlohmann::json& j,
                                             const std::string& path) {
  if (!j.is_array() || j.empty())
    throw validation_error(path, "expected a non-empty array of rows");
  const Eigen::VectorXd first = vector_from_json(j[0], path + "[0]");
  Eigen::MatrixXd m(j.size(), first.size());
  m.row(0) = first.transpose();
  for (std::size_t i = 1; i < j.size(); ++i) {
    const Eigen::VectorXd row =
        vector_from_json(j[i], path + "[" + std::to_string(i) + "]");
    if (row.size() != first.size())
      throw validation_error(path + "[" + std::to_string(i) + "]",
                             "rows must have equal length");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

// Field matrix from either an explicit antisymmetric matrix {"b": rows} or
// the canonical-block shorthand {"blocks": [c...], "extra_nullity": k}.
inline FieldMatrix field_spec_from_json(const nlohmann::json& j,
                                        const std::string& path) {
  if (!j.is_object()) throw validation_error(path, "expected an object");
  if (j.contains("b")) {
    detail::check_keys(j, path, {"b"});
    return field_from_json(j.at("b"), path + ".b");
  }
  detail::check_keys(j, path, {"blocks"}, {"extra_nullity"});
  const nlohmann::json& blocks = j.at("blocks");
  if (!blocks.is_array() || blocks.empty())
    throw validation_error(path + ".blocks",
                           "expected a non-empty array of frequencies");
  int nullity = 0;
  if (j.contains("extra_nullity")) {
    nullity = detail::get_int(j.at("extra_nullity"), path + ".extra_nullity");
    if (nullity < 0)
      throw validation_error(path + ".extra_nullity", "must be >= 0");
  }
  const int d = 2 * static_cast<int>(blocks.size()) + nullity;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const double c = detail::get_positive(
        blocks[k], path + ".blocks[" + std::to_string(k) + "]");
    b(2 * k, 2 * k + 1) = c;
    b(2 * k + 1, 2 * k) = -c;
  }
  return FieldMatrix(b);
}

struct BasisSpec {
  double energy = 0.0;
  int l_max = 0;
  int nodes = 32;
  double sigma_null = 0.0;
  std::vector<Eigen::VectorXd> null_spec;
};

inline BasisSpec basis_spec_from_json(const nlohmann::json& j,
                                      const std::string& path) {
  detail::check_keys(j, path, {"energy", "l_max", "nodes"},
                     {"sigma_null", "null_spec"});
  BasisSpec spec;
  spec.energy = detail::get_positive(j.at("energy"), path + ".energy");
  spec.l_max = detail::get_int(j.at("l_max"), path + ".l_max");
  if (spec.l_max < 0)
    throw validation_error(path + ".l_max", "must be >= 0");
  spec.nodes = detail::get_int(j.at("nodes"), path + ".nodes");
  if (spec.nodes < 4)
    throw validation_error(path + ".nodes", "need at least 4 nodes per axis");
  if (j.contains("sigma_null")) {
    spec.sigma_null =
        detail::get_number(j.at("sigma_null"), path + ".sigma_null");
    if (spec.sigma_null < 0.0)
      throw validation_error(path + ".sigma_null", "must be >= 0");
  }
  if (j.contains("null_spec")) {
    const nlohmann::json& ns = j.at("null_spec");
    if (!ns.is_array())
      throw validation_error(path + ".null_spec", "expected an array");
    for (std::size_t i = 0; i < ns.size(); ++i)
      spec.null_spec.push_back(vector_from_json(
          ns[i], path + ".null_spec[" + std::to_string(i) + "]"));
  }
  return spec;
}

// Strict wrapper over set_from_json: every variant has an exact key set.
inline SamplingSet set_spec_from_json(const nlohmann::json& j,
                                      const std::string& path) {
  if (!j.is_object()) throw validation_error(path, "expected an object");
  if (!j.contains("variant"))
    throw validation_error(path + ".variant", "missing required key");
  const std::string variant =
      detail::get_string(j.at("variant"), path + ".variant");
  if (variant == "full_space")
    detail::check_keys(j, path, {"variant", "d"});
  else if (variant == "periodic_holes")
    detail::check_keys(j, path, {"variant", "d", "period", "radius"});
  else if (variant == "stripes")
    detail::check_keys(j, path, {"variant", "d", "period", "width", "axis"});
  else if (variant == "bitmap")
    detail::check_keys(j, path,
                       {"variant", "d", "box_lo", "box_hi", "resolution",
                        "bits"});
  else
    throw validation_error(path + ".variant",
                           "unknown variant '" + variant + "'");
  return set_from_json(j);
}

struct ExperimentConfig {
  std::string command;
  nlohmann::json raw;
  std::optional<std::uint64_t> seed;
  std::string out;  // optional output directory, overridden by --out
  Tolerances tolerances;
};

namespace detail {

struct CommandSchema {
  std::set<std::string> required;
  std::set<std::string> optional;
  bool randomized = false;  // seed required
};

inline const CommandSchema& command_schema(const std::string& command) {
  static const std::map<std::string, CommandSchema> table = {
      {"decompose", {{"field"}, {}, false}},
      {"spectrum", {{"field", "energy"}, {}, false}},
      {"basis-check", {{"field", "basis"}, {}, false}},
      {"bernstein", {{"field", "basis", "m_max", "seeds", "seed"}, {}, true}},
      {"recursion", {{"field", "basis", "m_max", "seeds", "seed"}, {}, true}},
      {"good-bad",
       {{"field", "basis", "l"}, {"m_max", "ground", "random", "seed"},
        false}},
      {"remez", {{"degree", "measure", "trials", "seed"}, {}, true}},
      {"thickness", {{"set", "l", "resolution"}, {}, false}},
      {"observability",
       {{"field", "basis", "set"},
        {"l", "variant", "c_d", "companion", "resolution",
         "max_truncation_delta", "radial", "angular"},
        false}},
      {"optimality-scan", {{"c_block", "rho", "periods"}, {"nodes"}, false}},
      {"necessity", {{"field", "set", "translates"}, {"nodes"}, false}},
      {"heat-control",
       {{"field", "basis", "set", "horizon", "u0"},
        {"n_time", "stages", "seed", "radial", "angular"}, false}},
  };
  const auto it = table.find(command);
  if (it == table.end())
    throw validation_error("config.command",
                           "unknown command '" + command + "'");
  return it->second;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j,
                                     const std::string& command) {
  const detail::CommandSchema& schema = detail::command_schema(command);
  std::set<std::string> optional = schema.optional;
  optional.insert("command");
  optional.insert("out");
  optional.insert("tolerances");
  detail::check_keys(j, "config", schema.required, optional);

  ExperimentConfig cfg;
  cfg.command = command;
  cfg.raw = j;
  if (j.contains("command") &&
      detail::get_string(j.at("command"), "config.command") != command)
    throw validation_error("config.command",
                           "config names a different command than invoked");
  if (j.contains("out")) cfg.out = detail::get_string(j.at("out"), "config.out");
  if (j.contains("tolerances")) {
    detail::check_keys(j.at("tolerances"), "config.tolerances", {},
                       {"eta_orth", "eta_eig", "eta_bern", "eta_ctrl",
                        "eta_leak"});
    cfg.tolerances.load_overrides(j.at("tolerances"));
  }
  if (j.contains("seed"))
    cfg.seed = detail::get_seed(j.at("seed"), "config.seed");

  if (schema.randomized && !cfg.seed)
    throw validation_error("config.seed",
                           "seed is mandatory for randomized commands");
  if (command == "good-bad" && j.contains("random")) {
    const int n = detail::get_int(j.at("random"), "config.random");
    if (n > 0 && !cfg.seed)
      throw validation_error("config.seed",
                             "seed is mandatory when sampling random "
                             "functions");
  }
  if (command == "heat-control" && j.at("u0").is_object() &&
      j.at("u0").contains("random") && !cfg.seed)
    throw validation_error("config.seed",
                           "seed is mandatory for a random initial state");
  return cfg;
}

}  // namespace maglab
