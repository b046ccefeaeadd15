#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace stmala {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

inline constexpr const char* kVersion = "stmala 0.1.0";

// Thrown when an iterative numerical routine fails to converge or a
// computation leaves its valid domain (as opposed to a caller contract bug,
// which throws std::invalid_argument).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stmala
