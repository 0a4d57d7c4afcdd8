#pragma once

#include <stdexcept>
#include <string>

namespace cmdp_accel {

// Malformed instances, out-of-range arguments, inconsistent configurations.
// The CLI maps this to exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical or algorithmic failure on otherwise valid input (singular
// systems, NaN iterates, iteration budgets that cannot be honored).
// The CLI maps this to exit code 1.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cmdp_accel
