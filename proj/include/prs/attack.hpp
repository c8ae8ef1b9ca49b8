#pragma once

#include "prs/classifier.hpp"
#include "prs/common.hpp"
#include "prs/data.hpp"
#include "prs/projection.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace prs {

enum class AttackFamily { kPgd, kSubspacePgd, kRandMax, kRandUniform };

const char* to_string(AttackFamily family);
AttackFamily attack_family_from_string(const std::string& name);

struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  int steps = 40;
  double step_size = 2.0 / 255.0;
  AttackFamily family = AttackFamily::kPgd;
  std::uint64_t seed = 0;

  void validate() const;
  /// 40 steps of size 2/255.
  static AttackConfig pgd_defaults(double epsilon);
  /// 5 steps of size epsilon / 4.
  static AttackConfig subspace_defaults(double epsilon);
};

struct AttackResult {
  AttackFamily family = AttackFamily::kPgd;
  Vector delta;
  /// The attacked model's prediction at x + delta differs from the label.
  bool success = false;
  double linf_residual = 0.0;     // max(0, |delta|_inf - eps)
  double cube_residual = 0.0;     // max(0, |x + delta|_inf - 1/2)
  double nullspace_residual = 0.0;  // |U'delta|, subspace attacks only
};

/// l_inf PGD on the cross-entropy loss with sign-gradient steps, starting at x:
///   x_{i+1} = clip_cube(x + clip_eps(x_i + step * sign(grad) - x)).
AttackResult pgd(const MlpClassifier& model, const Vector& x, int label, const AttackConfig& cfg);

/// PGD restricted to delta = V a: a sign-gradient step on a followed by the
/// Euclidean projection of qp_project, so every iterate is feasible.
AttackResult subspace_pgd(const MlpClassifier& model, const ProjectionBasis& basis, const Vector& x, int label,
                          const AttackConfig& cfg);

/// argmin |a - target|^2  s.t.  |V a|_inf <= eps,  |x + V a|_inf <= 1/2.
/// Throws NumericalError if the projection does not converge.
Vector qp_project(const Matrix& nullspace, const Vector& target, double epsilon, const Vector& x);

/// Uniformly random corner of the eps-ball, clipped to the cube.
Vector rand_max_delta(const Vector& x, double epsilon, std::uint64_t seed, std::uint64_t stream = 0);
/// Uniform sample from the eps-ball, clipped to the cube.
Vector rand_uniform_delta(const Vector& x, double epsilon, std::uint64_t seed, std::uint64_t stream = 0);

AttackResult rand_max(const MlpClassifier& model, const Vector& x, int label, double epsilon, std::uint64_t seed,
                      std::uint64_t stream = 0);
AttackResult rand_uniform(const MlpClassifier& model, const Vector& x, int label, double epsilon,
                          std::uint64_t seed, std::uint64_t stream = 0);

struct SweepSettings {
  std::vector<AttackFamily> families{AttackFamily::kPgd, AttackFamily::kSubspacePgd, AttackFamily::kRandMax,
                                     AttackFamily::kRandUniform};
  int pgd_steps = 40;
  double pgd_step_size = 2.0 / 255.0;
  int subspace_steps = 5;
  /// SubspacePGD step size as a fraction of epsilon.
  double subspace_step_fraction = 0.25;
  /// Inputs considered, before filtering to correctly classified ones.
  Eigen::Index max_inputs = 100;
  std::uint64_t seed = 0;
};

struct SweepRow {
  AttackFamily family;
  double epsilon = 0.0;
  Eigen::Index n_inputs = 0;
  double success_rate = 0.0;
  double mean_linf_residual = 0.0;
  double mean_cube_residual = 0.0;
  double mean_nullspace_residual = 0.0;
  double max_linf_residual = 0.0;
  double max_cube_residual = 0.0;
  double max_nullspace_residual = 0.0;
};

/// Success rate of every family at every epsilon, over the inputs the model
/// classifies correctly. Rows are ordered by family, then epsilon.
std::vector<SweepRow> attack_sweep(const MlpClassifier& model, const ProjectionBasis& basis, const Dataset& data,
                                   const std::vector<double>& epsilons, const SweepSettings& settings);

}  // namespace prs
