#pragma once

#include <stdexcept>
#include <string>

namespace unifews {

/// Malformed input: bad shapes, invalid parameters, corrupt bundles. CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, singular systems, solver non-convergence. CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace unifews
