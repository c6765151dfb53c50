#pragma once

#include <stdexcept>
#include <string>

namespace featbo {

/// Raised when a computation breaks down numerically (non-finite objective,
/// failed factorization). Distinct from std::invalid_argument, which is used
/// for malformed inputs such as dimension mismatches.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace featbo
