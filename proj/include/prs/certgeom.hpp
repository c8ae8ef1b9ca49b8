#pragma once

#include "prs/common.hpp"
#include "prs/projection.hpp"
#include "prs/smoothing.hpp"

#include <cstdint>
#include <limits>

namespace prs {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Membership in the certified set {delta : |U'delta| <= R}.
bool region_contains(const ProjectionBasis& basis, double radius, const Vector& delta);

/// min over alpha of |x + V alpha|_inf, solved as the epigraph LP
///   minimize s  subject to  -s <= x_i + (V alpha)_i <= s.
struct LinfDistance {
  /// |x + V alpha_star|_inf evaluated directly; an upper bound on the minimum.
  double t = 0.0;
  Vector alpha_star;
  /// A dual-feasible lower bound w'x with w in span(U), |w|_1 <= 1.
  double lower_bound = 0.0;
  /// t - lower_bound: how far t can exceed the true minimum.
  double gap = 0.0;
  int pivots = 0;
};

/// Throws NumericalError if the LP does not reach optimality (the problem is
/// always feasible and bounded, so this indicates a solver failure).
LinfDistance linf_distance(const Vector& x, const Matrix& nullspace);

/// r* = min{R, p(1 - 2t) / (2d)}, the maximizer of r^p (1 - 2r - 2t)^(d-p) on [0, R].
/// Requires 0 <= t < 1/2 and 0 <= R <= 1/2 - t.
double optimal_radius(double radius, Eigen::Index p, Eigen::Index d, double t);

struct VolumeBound {
  double log10_volume = kNegInf;
  double r_star = 0.0;
  /// Radius after clamping into [0, 1/2 - t).
  double radius_used = 0.0;
  bool clamped = false;
  /// t >= 1/2 or nothing left to certify.
  bool degenerate = false;
};

/// Lower bound on log10 Vol_d(C^d intersected with the certified region around x):
///   log10 [ pi^(p/2) / Gamma(p/2 + 1) * r*^p * (1 - 2 r* - 2t)^(d-p) ].
/// A radius above 1/2 - t is first clamped to 1/2 - t - 1e-12.
VolumeBound volume_bound(Eigen::Index d, Eigen::Index p, double radius, double t);
double projected_volume_log10(Eigen::Index d, Eigen::Index p, double radius, double t);

/// log10 of the volume of the d-dimensional Euclidean ball of radius R.
double l2_ball_volume_log10(Eigen::Index d, double radius);

/// projected_volume_log10(d, p, R_proj, t) - l2_ball_volume_log10(d, R_ball).
double volume_ratio_log10(Eigen::Index d, Eigen::Index p, double radius_proj, double t, double radius_ball);

/// Monte Carlo estimate of Vol_d(C^d intersected with {y : |U'(y - x)| <= R}).
struct McVolume {
  double estimate = 0.0;
  /// Half-width of the exact 99% binomial interval.
  double half_width = 0.0;
  std::int64_t hits = 0;
  std::int64_t samples = 0;
};
McVolume mc_volume_estimate(const ProjectionBasis& basis, double radius, const Vector& x, std::int64_t samples,
                            std::uint64_t seed);

/// Per-input result of projected certification.
struct Certificate {
  std::uint64_t input_id = 0;
  bool abstain = true;
  int predicted = -1;
  double pa_lower = 0.0;
  double radius_raw = 0.0;
  bool radius_clamped = false;
  double t = 0.0;
  double lp_gap = 0.0;
  double r_star = 0.0;
  double log10_volume = kNegInf;
  /// Euclidean ball of radius radius_raw in d dimensions (contained in the certified set).
  double log10_l2_ball_volume = kNegInf;
  double log10_ratio = std::numeric_limits<double>::quiet_NaN();
};

/// Completes a smoothing outcome at x into a certificate: the LP for t, the
/// radius adjustment and the volume bound.
Certificate make_certificate(std::uint64_t input_id, const SmoothOutcome& outcome, const ProjectionBasis& basis,
                             const Vector& x);

/// The full projected certification pipeline for one input.
Certificate certify_projected(const MlpClassifier& model, const ProjectionBasis& basis, const Vector& x,
                              const SmoothingParams& prm, std::uint64_t input_id);

}  // namespace prs
