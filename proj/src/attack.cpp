#include "prs/attack.hpp"

#include "prs/optim.hpp"
#include "prs/rng.hpp"

#include <algorithm>
#include <cmath>

namespace prs {

const char* to_string(AttackFamily family) {
  switch (family) {
    case AttackFamily::kPgd: return "PGD";
    case AttackFamily::kSubspacePgd: return "SubspacePGD";
    case AttackFamily::kRandMax: return "RandMax";
    case AttackFamily::kRandUniform: return "RandUniform";
  }
  return "unknown";
}

AttackFamily attack_family_from_string(const std::string& name) {
  if (name == "PGD" || name == "pgd") return AttackFamily::kPgd;
  if (name == "SubspacePGD" || name == "subspace_pgd") return AttackFamily::kSubspacePgd;
  if (name == "RandMax" || name == "rand_max") return AttackFamily::kRandMax;
  if (name == "RandUniform" || name == "rand_uniform") return AttackFamily::kRandUniform;
  throw std::invalid_argument("unknown attack family '" + name + "'");
}

void AttackConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("AttackConfig: epsilon must lie in (0, 1]");
  if (steps < 1) throw std::invalid_argument("AttackConfig: steps must be at least 1");
  if (!(step_size > 0.0)) throw std::invalid_argument("AttackConfig: step_size must be positive");
}

AttackConfig AttackConfig::pgd_defaults(double epsilon) {
  return AttackConfig{epsilon, 40, 2.0 / 255.0, AttackFamily::kPgd, 0};
}

AttackConfig AttackConfig::subspace_defaults(double epsilon) {
  return AttackConfig{epsilon, 5, epsilon / 4.0, AttackFamily::kSubspacePgd, 0};
}

namespace {

Vector sign(const Vector& v) {
  return v.unaryExpr([](double a) { return static_cast<double>((a > 0.0) - (a < 0.0)); });
}

Vector clip_cube(const Vector& v) { return v.cwiseMax(-0.5).cwiseMin(0.5); }

AttackResult finish(AttackFamily family, const MlpClassifier& model, const Vector& x, int label, Vector delta,
                    double epsilon, const ProjectionBasis* basis) {
  AttackResult r;
  r.family = family;
  r.linf_residual = std::max(0.0, delta.lpNorm<Eigen::Infinity>() - epsilon);
  r.cube_residual = std::max(0.0, (x + delta).lpNorm<Eigen::Infinity>() - 0.5);
  if (basis) r.nullspace_residual = basis->project(delta).norm();
  r.success = model.predict(x + delta) != label;
  r.delta = std::move(delta);
  return r;
}

void check_input(const MlpClassifier& model, const Vector& x, int label) {
  require_dim(x.size(), model.input_dim(), "attack input");
  if (label < 0 || label >= model.num_classes()) throw std::out_of_range("attack: label out of range");
}

}  // namespace

AttackResult pgd(const MlpClassifier& model, const Vector& x, int label, const AttackConfig& cfg) {
  cfg.validate();
  check_input(model, x, label);
  Vector adv = x;
  for (int i = 0; i < cfg.steps; ++i) {
    const Vector stepped = adv + cfg.step_size * sign(model.input_gradient(adv, label));
    const Vector delta = (stepped - x).cwiseMax(-cfg.epsilon).cwiseMin(cfg.epsilon);
    adv = clip_cube(x + delta);
  }
  return finish(AttackFamily::kPgd, model, x, label, adv - x, cfg.epsilon, nullptr);
}

Vector qp_project(const Matrix& nullspace, const Vector& target, double epsilon, const Vector& x) {
  require_dim(target.size(), nullspace.cols(), "qp_project target");
  require_dim(x.size(), nullspace.rows(), "qp_project x");
  if (!(epsilon > 0.0)) throw std::invalid_argument("qp_project: epsilon must be positive");
  Vector lo;
  Vector hi;
  perturbation_box(x, epsilon, lo, hi);
  const BoxProjection r = box_intersection_project(nullspace, target, lo, hi);
  if (!r.converged) {
    throw NumericalError("qp_project: alternating projection did not converge in " +
                         std::to_string(r.iterations) + " iterations");
  }
  return r.coefficients;
}

AttackResult subspace_pgd(const MlpClassifier& model, const ProjectionBasis& basis, const Vector& x, int label,
                          const AttackConfig& cfg) {
  cfg.validate();
  check_input(model, x, label);
  require_dim(basis.ambient_dim(), x.size(), "subspace_pgd basis");
  const Matrix& v = basis.v();
  Vector coeffs = Vector::Zero(v.cols());
  for (int i = 0; i < cfg.steps; ++i) {
    const Vector grad = v.transpose() * model.input_gradient(x + v * coeffs, label);
    const Vector target = coeffs + cfg.step_size * sign(grad);
    coeffs = qp_project(v, target, cfg.epsilon, x);
  }
  return finish(AttackFamily::kSubspacePgd, model, x, label, v * coeffs, cfg.epsilon, &basis);
}

Vector rand_max_delta(const Vector& x, double epsilon, std::uint64_t seed, std::uint64_t stream) {
  CounterRng rng(seed, 0x4a11ULL, stream);
  Vector delta(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) delta(i) = (rng() >> 63) ? epsilon : -epsilon;
  return clip_cube(x + delta) - x;
}

Vector rand_uniform_delta(const Vector& x, double epsilon, std::uint64_t seed, std::uint64_t stream) {
  CounterRng rng(seed, 0x4a12ULL, stream);
  Vector delta(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) delta(i) = epsilon * (2.0 * rng.uniform() - 1.0);
  return clip_cube(x + delta) - x;
}

AttackResult rand_max(const MlpClassifier& model, const Vector& x, int label, double epsilon, std::uint64_t seed,
                      std::uint64_t stream) {
  check_input(model, x, label);
  return finish(AttackFamily::kRandMax, model, x, label, rand_max_delta(x, epsilon, seed, stream), epsilon,
                nullptr);
}

AttackResult rand_uniform(const MlpClassifier& model, const Vector& x, int label, double epsilon,
                          std::uint64_t seed, std::uint64_t stream) {
  check_input(model, x, label);
  return finish(AttackFamily::kRandUniform, model, x, label, rand_uniform_delta(x, epsilon, seed, stream),
                epsilon, nullptr);
}

std::vector<SweepRow> attack_sweep(const MlpClassifier& model, const ProjectionBasis& basis, const Dataset& data,
                                   const std::vector<double>& epsilons, const SweepSettings& settings) {
  require_dim(data.dim(), model.input_dim(), "attack_sweep dataset");
  const Eigen::Index limit = std::min(settings.max_inputs, data.size());
  std::vector<Eigen::Index> correct;
  for (Eigen::Index i = 0; i < limit; ++i) {
    if (model.predict(data.input(i)) == data.labels[static_cast<std::size_t>(i)]) correct.push_back(i);
  }
  std::vector<SweepRow> rows;
  for (AttackFamily family : settings.families) {
    for (double eps : epsilons) {
      SweepRow row;
      row.family = family;
      row.epsilon = eps;
      row.n_inputs = static_cast<Eigen::Index>(correct.size());
      Eigen::Index successes = 0;
      for (Eigen::Index idx : correct) {
        const Vector x = data.input(idx);
        const int y = data.labels[static_cast<std::size_t>(idx)];
        const auto stream = static_cast<std::uint64_t>(idx);
        AttackResult r;
        switch (family) {
          case AttackFamily::kPgd: {
            AttackConfig cfg{eps, settings.pgd_steps, settings.pgd_step_size, family, settings.seed};
            r = pgd(model, x, y, cfg);
            r.nullspace_residual = 0.0;
            break;
          }
          case AttackFamily::kSubspacePgd: {
            AttackConfig cfg{eps, settings.subspace_steps, settings.subspace_step_fraction * eps, family,
                             settings.seed};
            r = subspace_pgd(model, basis, x, y, cfg);
            break;
          }
          case AttackFamily::kRandMax: r = rand_max(model, x, y, eps, settings.seed, stream); break;
          case AttackFamily::kRandUniform: r = rand_uniform(model, x, y, eps, settings.seed, stream); break;
        }
        successes += r.success;
        row.mean_linf_residual += r.linf_residual;
        row.mean_cube_residual += r.cube_residual;
        row.mean_nullspace_residual += r.nullspace_residual;
        row.max_linf_residual = std::max(row.max_linf_residual, r.linf_residual);
        row.max_cube_residual = std::max(row.max_cube_residual, r.cube_residual);
        row.max_nullspace_residual = std::max(row.max_nullspace_residual, r.nullspace_residual);
      }
      if (row.n_inputs > 0) {
        const auto n = static_cast<double>(row.n_inputs);
        row.success_rate = static_cast<double>(successes) / n;
        row.mean_linf_residual /= n;
        row.mean_cube_residual /= n;
        row.mean_nullspace_residual /= n;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace prs
