#pragma once

// Shared aliases and error types used across the library.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mvsl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

// Thrown when matrix dimensions do not line up for an operation.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown for invalid argument values (empty batches, bad indices, ...).
struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a configuration fails validation before any work is done.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a numeric quantity becomes non-finite during a run.
struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown on file I/O and parse failures; messages carry file and line info.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

inline std::string shape_str(Index r, Index c) {
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

}  // namespace mvsl
