#pragma once

#include <stdexcept>
#include <string>

namespace svirkit {

// Bad arguments, malformed configs, out-of-contract inputs.  CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
public:
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Failures of the numerics themselves (non-convergent quadrature, singular
// systems after the retry policy, diverging iterations).  CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace svirkit
