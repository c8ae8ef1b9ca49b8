#pragma once

#include "prs/common.hpp"

#include <vector>

namespace prs {

/// minimize c'x subject to A x <= b, with x >= 0 except where `free_var` is set.
struct LpProblem {
  Vector objective;
  Matrix constraints;
  Vector rhs;
  std::vector<bool> free_var;  // empty means all variables are nonnegative

  Eigen::Index num_vars() const { return objective.size(); }
  void validate() const;
};

enum class LpStatus { kOptimal, kUnbounded, kInfeasible, kIterationCap };

const char* to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::kIterationCap;
  Vector x;
  double objective = 0.0;
  /// Dual multipliers for the rows of A x <= b (nonpositive in this sign convention).
  Vector dual;
  /// b'y, a lower bound on the optimum whenever `dual` is dual feasible.
  double dual_objective = 0.0;
  /// objective - dual_objective, plus any dual infeasibility mass.
  double gap = 0.0;
  double primal_residual = 0.0;
  double slackness_residual = 0.0;
  int pivots = 0;
};

/// Dense two-phase primal simplex with Bland's rule. Non-optimal outcomes are
/// reported through `status`, never thrown.
LpSolution simplex_solve(const LpProblem& problem);

/// Result of projecting onto {V a : lo <= V a <= hi} where the box contains 0.
struct BoxProjection {
  Vector coefficients;  // a, in the subspace basis
  int iterations = 0;
  bool converged = false;
  /// Factor in (0, 1] applied at the end to restore exact box feasibility.
  double feasibility_scale = 1.0;
};

/// Euclidean projection of V * target onto the intersection of span(V) with the
/// coordinate box [lo, hi] (which must contain the origin), solved by Dykstra's
/// alternating projections. V must have orthonormal columns.
BoxProjection box_intersection_project(const Matrix& basis, const Vector& target,
                                       const Vector& lo, const Vector& hi);

/// Intersection of {|delta|_inf <= eps} and {|x + delta|_inf <= 1/2} as one box.
void perturbation_box(const Vector& x, double epsilon, Vector& lo, Vector& hi);

}  // namespace prs
