#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace crfconv {

/// Row-per-node feature storage. Row i holds the feature vector of node i.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PositionMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using NodeIndex = std::size_t;

/// Raised when an input file or text stream does not follow its declared format.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Array shapes or dimensions that do not chain.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A value violates a documented invariant (NaN, negative weight, self loop, ...).
class InvariantError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The requested combination of options has no implementation.
class UnsupportedConfiguration : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A linear solve finished outside its residual tolerance.
class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

}  // namespace crfconv
