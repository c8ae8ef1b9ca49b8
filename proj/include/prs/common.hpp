#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace prs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Shape or length mismatch between arguments.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A solver failed on an instance that is known to be feasible and bounded.
/// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or configuration.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tolerances shared by the solvers and the property tests.
namespace tol {
inline constexpr double kOrthonormal = 1e-8;
inline constexpr double kRegionSlack = 1e-12;
inline constexpr double kLpPivot = 1e-11;
inline constexpr double kLpFeasibility = 1e-9;
inline constexpr double kLpGap = 1e-7;
inline constexpr int kLpMaxPivots = 100000;
inline constexpr double kQpStep = 1e-8;
inline constexpr int kQpMaxIterations = 10000;
inline constexpr double kRadiusClamp = 1e-12;
inline constexpr double kBetaContinuedFraction = 1e-12;
inline constexpr double kBetaQuantile = 1e-12;
}  // namespace tol

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace prs
