#include "prs/certgeom.hpp"

#include "prs/optim.hpp"
#include "prs/rng.hpp"
#include "prs/special.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace prs {

bool region_contains(const ProjectionBasis& basis, double radius, const Vector& delta) {
  if (!(radius >= 0.0)) throw std::invalid_argument("region_contains: radius must be nonnegative");
  return basis.project(delta).norm() <= radius + tol::kRegionSlack;
}

LinfDistance linf_distance(const Vector& x, const Matrix& nullspace) {
  const Eigen::Index d = x.size();
  require_dim(nullspace.rows(), d, "linf_distance nullspace rows");
  const Eigen::Index k = nullspace.cols();
  LinfDistance out;
  out.alpha_star = Vector::Zero(k);
  if (k == 0) {
    out.t = x.lpNorm<Eigen::Infinity>();
    out.lower_bound = out.t;
    return out;
  }

  // Variables [alpha (free), s >= 0]; rows  V alpha - s <= -x  and  -V alpha - s <= x.
  LpProblem lp;
  lp.objective = Vector::Zero(k + 1);
  lp.objective(k) = 1.0;
  lp.constraints.resize(2 * d, k + 1);
  lp.constraints.topLeftCorner(d, k) = nullspace;
  lp.constraints.bottomLeftCorner(d, k) = -nullspace;
  lp.constraints.col(k).setConstant(-1.0);
  lp.rhs.resize(2 * d);
  lp.rhs.head(d) = -x;
  lp.rhs.tail(d) = x;
  lp.free_var.assign(static_cast<std::size_t>(k + 1), true);
  lp.free_var.back() = false;

  const LpSolution sol = simplex_solve(lp);
  if (sol.status != LpStatus::kOptimal) {
    throw NumericalError(std::string("linf_distance: LP terminated with status ") + to_string(sol.status));
  }
  out.alpha_star = sol.x.head(k);
  out.t = (x + nullspace * out.alpha_star).lpNorm<Eigen::Infinity>();
  out.pivots = sol.pivots;

  // Dual route: w = -(y_upper - y_lower) is orthogonal to span(V) with |w|_1 <= 1
  // and w'x <= t. Re-orthogonalize and renormalize so the bound holds exactly.
  Vector w = -(sol.dual.head(d) - sol.dual.tail(d));
  w -= nullspace * (nullspace.transpose() * w);
  const double l1 = w.lpNorm<1>();
  if (l1 > 1.0) w /= l1;
  out.lower_bound = std::max(0.0, w.dot(x));
  out.gap = std::max(0.0, out.t - out.lower_bound);
  return out;
}

double optimal_radius(double radius, Eigen::Index p, Eigen::Index d, double t) {
  if (p < 1 || p > d) throw DimensionError("optimal_radius: need 1 <= p <= d");
  if (!(t >= 0.0 && t < 0.5)) throw std::invalid_argument("optimal_radius: t must lie in [0, 1/2)");
  if (!(radius >= 0.0)) throw std::invalid_argument("optimal_radius: radius must be nonnegative");
  if (radius > 0.5 - t) {
    throw std::invalid_argument("optimal_radius: radius exceeds 1/2 - t; clamp it first");
  }
  const double peak = static_cast<double>(p) * (1.0 - 2.0 * t) / (2.0 * static_cast<double>(d));
  return std::min(radius, peak);
}

namespace {
// log10 of pi^(m/2) / Gamma(m/2 + 1)
double log10_unit_ball(Eigen::Index m) {
  const double half = 0.5 * static_cast<double>(m);
  return half * std::log10(std::numbers::pi) - log_gamma(half + 1.0) / std::numbers::ln10;
}
}  // namespace

VolumeBound volume_bound(Eigen::Index d, Eigen::Index p, double radius, double t) {
  if (p < 1 || p > d) throw DimensionError("volume_bound: need 1 <= p <= d");
  if (!(radius >= 0.0)) throw std::invalid_argument("volume_bound: radius must be nonnegative");
  if (!(t >= 0.0)) throw std::invalid_argument("volume_bound: t must be nonnegative");
  VolumeBound out;
  const double limit = 0.5 - t - tol::kRadiusClamp;
  if (!(limit > 0.0)) {
    out.degenerate = true;
    return out;
  }
  out.radius_used = radius;
  if (radius > limit) {
    out.radius_used = limit;
    out.clamped = true;
  }
  out.r_star = optimal_radius(out.radius_used, p, d, t);
  const double side = 1.0 - 2.0 * out.r_star - 2.0 * t;
  if (out.r_star <= 0.0) return out;
  if (d > p && side <= 0.0) {
    out.degenerate = true;
    return out;
  }
  double value = log10_unit_ball(p) + static_cast<double>(p) * std::log10(out.r_star);
  // (1 - 2r - 2t)^0 = 1 when p = d.
  if (d > p) value += static_cast<double>(d - p) * std::log10(side);
  out.log10_volume = value;
  return out;
}

double projected_volume_log10(Eigen::Index d, Eigen::Index p, double radius, double t) {
  return volume_bound(d, p, radius, t).log10_volume;
}

double l2_ball_volume_log10(Eigen::Index d, double radius) {
  if (d < 1) throw DimensionError("l2_ball_volume_log10: d must be positive");
  if (!(radius >= 0.0)) throw std::invalid_argument("l2_ball_volume_log10: radius must be nonnegative");
  if (radius == 0.0) return kNegInf;
  return log10_unit_ball(d) + static_cast<double>(d) * std::log10(radius);
}

double volume_ratio_log10(Eigen::Index d, Eigen::Index p, double radius_proj, double t, double radius_ball) {
  const double proj = projected_volume_log10(d, p, radius_proj, t);
  const double ball = l2_ball_volume_log10(d, radius_ball);
  if (proj == kNegInf) return kNegInf;
  if (ball == kNegInf) return std::numeric_limits<double>::infinity();
  return proj - ball;
}

McVolume mc_volume_estimate(const ProjectionBasis& basis, double radius, const Vector& x, std::int64_t samples,
                            std::uint64_t seed) {
  const Eigen::Index d = basis.ambient_dim();
  require_dim(x.size(), d, "mc_volume_estimate x");
  if (samples < 1) throw std::invalid_argument("mc_volume_estimate: need at least one sample");
  if (!(radius >= 0.0)) throw std::invalid_argument("mc_volume_estimate: radius must be nonnegative");
  const Matrix ut = basis.u().transpose();
  const Vector center = ut * x;
  const double r2 = radius * radius;
  CounterRng rng(seed, 0x0c0be5ULL);
  McVolume out;
  out.samples = samples;
  Vector y(d);
  for (std::int64_t s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < d; ++i) y(i) = rng.uniform() - 0.5;
    if ((ut * y - center).squaredNorm() <= r2) ++out.hits;
  }
  out.estimate = static_cast<double>(out.hits) / static_cast<double>(samples);
  const double lo = clopper_pearson_lower(out.hits, samples, 0.005);
  const double hi = clopper_pearson_upper(out.hits, samples, 0.005);
  out.half_width = std::max(out.estimate - lo, hi - out.estimate);
  return out;
}

Certificate make_certificate(std::uint64_t input_id, const SmoothOutcome& outcome, const ProjectionBasis& basis,
                             const Vector& x) {
  Certificate cert;
  cert.input_id = input_id;
  if (outcome.abstain) return cert;
  const Eigen::Index d = basis.ambient_dim();
  const Eigen::Index p = basis.projected_dim();
  cert.abstain = false;
  cert.predicted = outcome.predicted;
  cert.pa_lower = outcome.pa_lower;
  cert.radius_raw = outcome.radius;
  const LinfDistance dist = linf_distance(x, basis.v());
  cert.t = dist.t;
  cert.lp_gap = dist.gap;
  const VolumeBound vb = volume_bound(d, p, outcome.radius, dist.t);
  cert.radius_clamped = vb.clamped;
  cert.r_star = vb.r_star;
  cert.log10_volume = vb.log10_volume;
  cert.log10_l2_ball_volume = l2_ball_volume_log10(d, outcome.radius);
  cert.log10_ratio = cert.log10_volume - cert.log10_l2_ball_volume;
  return cert;
}

Certificate certify_projected(const MlpClassifier& model, const ProjectionBasis& basis, const Vector& x,
                              const SmoothingParams& prm, std::uint64_t input_id) {
  return make_certificate(input_id, project_certify(model, basis, x, prm, input_id), basis, x);
}

}  // namespace prs
