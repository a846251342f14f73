#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace promp {

/// Bad user input: malformed files, wrong dimensions, out-of-range options.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Demo or model file could not be parsed. Carries the 1-based location.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, int line, int column)
      : InputError(what + " (line " + std::to_string(line) + ", column " +
                   std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Demonstrations in one training set disagree on the number of joints.
class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

/// Timestamps are not strictly increasing.
class TimeOrderError : public InputError {
 public:
  using InputError::InputError;
};

/// A factorization or inversion failed even after jitter.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Task-space adaptation did not converge. Keeps the best joint-space iterate.
class AdaptationError : public std::runtime_error {
 public:
  AdaptationError(const std::string& what, Eigen::VectorXd best_iterate, double grad_norm)
      : std::runtime_error(what), best_iterate_(std::move(best_iterate)), grad_norm_(grad_norm) {}
  const Eigen::VectorXd& best_iterate() const { return best_iterate_; }
  double grad_norm() const { return grad_norm_; }

 private:
  Eigen::VectorXd best_iterate_;
  double grad_norm_;
};

}  // namespace promp
