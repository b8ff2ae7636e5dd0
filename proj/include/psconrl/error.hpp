#pragma once

#include <stdexcept>
#include <string>

namespace psconrl {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent shapes between objects that must agree (model vs. policy, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite numbers, out-of-range indices or parameters.
class InputError : public Error {
 public:
  using Error::Error;
};

// The simplex method exceeded its pivot budget.
class SolverStall : public Error {
 public:
  using Error::Error;
};

// Relative value iteration did not converge; in practice the model is not
// communicating with respect to the requested cost.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

class NotCommunicating : public Error {
 public:
  using Error::Error;
};

class UnreachableTarget : public Error {
 public:
  using Error::Error;
};

// Policy evaluation was asked for a chain that is not irreducible.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// The constrained problem of a fixed environment has no feasible policy.
class InfeasibleModel : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int row, int col)
      : Error(what + " (row " + std::to_string(row) + ", col " +
              std::to_string(col) + ")"),
        row_(row),
        col_(col) {}

  int row() const noexcept { return row_; }
  int col() const noexcept { return col_; }

 private:
  int row_;
  int col_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace psconrl
