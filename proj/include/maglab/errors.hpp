#pragma once
#include <stdexcept>
#include <string>

namespace maglab {

// Bad user input (config values, malformed matrices, out-of-range parameters).
// The CLI maps this to exit code 2 and prints the offending field path.
struct validation_error : std::invalid_argument {
  std::string field;
  validation_error(std::string field_path, const std::string& what)
      : std::invalid_argument(what), field(std::move(field_path)) {}
};

// A numerical guarantee the library promises did not hold at run time
// (orthonormality drift, indefinite Gramian, under-resolved grid, ...).
// The CLI maps this to exit code 1 and prints the assertion id.
struct invariant_error : std::runtime_error {
  std::string assertion;
  invariant_error(std::string assertion_id, const std::string& what)
      : std::runtime_error(what), assertion(std::move(assertion_id)) {}
};

}  // namespace maglab
