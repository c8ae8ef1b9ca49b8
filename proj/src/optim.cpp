#include "prs/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace prs {

void LpProblem::validate() const {
  const Eigen::Index n = objective.size();
  if (constraints.cols() != n) throw DimensionError("LpProblem: constraint matrix has wrong column count");
  if (constraints.rows() != rhs.size()) throw DimensionError("LpProblem: rhs length differs from row count");
  if (!free_var.empty() && static_cast<Eigen::Index>(free_var.size()) != n) {
    throw DimensionError("LpProblem: free_var flags have wrong length");
  }
  if (!objective.allFinite() || !constraints.allFinite() || !rhs.allFinite()) {
    throw std::invalid_argument("LpProblem: entries must be finite");
  }
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kIterationCap: return "iteration-cap";
  }
  return "unknown";
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Tableau over columns [structural | slack | artificial | rhs]; the last row
// holds reduced costs and minus the objective value.
class Tableau {
 public:
  Tableau(const LpProblem& lp) : m_(lp.constraints.rows()) {
    const Eigen::Index n = lp.num_vars();
    for (Eigen::Index j = 0; j < n; ++j) {
      column_source_.push_back({j, 1.0});
      if (!lp.free_var.empty() && lp.free_var[static_cast<std::size_t>(j)]) column_source_.push_back({j, -1.0});
    }
    n_struct_ = static_cast<Eigen::Index>(column_source_.size());
    row_sign_.assign(static_cast<std::size_t>(m_), 1.0);
    Eigen::Index n_art = 0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (lp.rhs(i) < 0.0) {
        row_sign_[static_cast<std::size_t>(i)] = -1.0;
        ++n_art;
      }
    }
    art_begin_ = n_struct_ + m_;
    rhs_col_ = art_begin_ + n_art;
    t_ = RowMatrix::Zero(m_ + 1, rhs_col_ + 1);
    basis_.assign(static_cast<std::size_t>(m_), 0);
    unit_col_.assign(static_cast<std::size_t>(m_), 0);
    Eigen::Index next_art = art_begin_;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double s = row_sign_[static_cast<std::size_t>(i)];
      for (Eigen::Index c = 0; c < n_struct_; ++c) {
        const auto& src = column_source_[static_cast<std::size_t>(c)];
        t_(i, c) = s * src.second * lp.constraints(i, src.first);
      }
      t_(i, n_struct_ + i) = s;
      t_(i, rhs_col_) = s * lp.rhs(i);
      if (s < 0.0) {
        t_(i, next_art) = 1.0;
        basis_[static_cast<std::size_t>(i)] = next_art;
        unit_col_[static_cast<std::size_t>(i)] = next_art;
        ++next_art;
      } else {
        basis_[static_cast<std::size_t>(i)] = n_struct_ + i;
        unit_col_[static_cast<std::size_t>(i)] = n_struct_ + i;
      }
    }
  }

  bool has_artificials() const { return art_begin_ < rhs_col_; }

  void set_costs(const Vector& costs) {
    auto obj = t_.row(m_);
    obj.setZero();
    for (Eigen::Index c = 0; c < costs.size(); ++c) obj(c) = costs(c);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double cb = obj(basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) obj -= cb * t_.row(i);
    }
  }

  Vector phase1_costs() const {
    Vector c = Vector::Zero(rhs_col_);
    c.segment(art_begin_, rhs_col_ - art_begin_).setOnes();
    return c;
  }

  Vector phase2_costs(const LpProblem& lp) const {
    Vector c = Vector::Zero(rhs_col_);
    for (Eigen::Index k = 0; k < n_struct_; ++k) {
      const auto& src = column_source_[static_cast<std::size_t>(k)];
      c(k) = src.second * lp.objective(src.first);
    }
    return c;
  }

  // Runs Bland's rule until optimal, unbounded or the pivot cap.
  LpStatus optimize(Eigen::Index entering_limit, int& pivots) {
    while (true) {
      if (pivots >= tol::kLpMaxPivots) return LpStatus::kIterationCap;
      Eigen::Index enter = -1;
      for (Eigen::Index c = 0; c < entering_limit; ++c) {
        if (t_(m_, c) < -tol::kLpPivot * 10.0) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return LpStatus::kOptimal;
      Eigen::Index leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double a = t_(i, enter);
        if (a <= tol::kLpPivot) continue;
        const double ratio = t_(i, rhs_col_) / a;
        if (leave < 0) {
          best_ratio = ratio;
          leave = i;
          continue;
        }
        const double tie = 1e-12 * std::max(1.0, std::abs(best_ratio));
        if (ratio < best_ratio - tie) {
          best_ratio = ratio;
          leave = i;
        } else if (ratio <= best_ratio + tie &&
                   basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
          leave = i;
        }
      }
      if (leave < 0) return LpStatus::kUnbounded;
      pivot(leave, enter);
      ++pivots;
    }
  }

  // After phase 1, swap zero-level artificials out of the basis where possible.
  void drive_out_artificials(int& pivots) {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < art_begin_) continue;
      Eigen::Index best = -1;
      double best_abs = tol::kLpPivot * 1e3;
      for (Eigen::Index c = 0; c < art_begin_; ++c) {
        if (std::abs(t_(i, c)) > best_abs) {
          best_abs = std::abs(t_(i, c));
          best = c;
        }
      }
      if (best >= 0) {
        pivot(i, best);
        ++pivots;
      }
    }
  }

  double objective_value() const { return -t_(m_, rhs_col_); }
  Eigen::Index art_begin() const { return art_begin_; }
  Eigen::Index num_cols() const { return rhs_col_; }

  Vector primal(const LpProblem& lp) const {
    Vector cols = Vector::Zero(rhs_col_);
    for (Eigen::Index i = 0; i < m_; ++i) cols(basis_[static_cast<std::size_t>(i)]) = t_(i, rhs_col_);
    Vector x = Vector::Zero(lp.num_vars());
    for (Eigen::Index k = 0; k < n_struct_; ++k) {
      const auto& src = column_source_[static_cast<std::size_t>(k)];
      x(src.first) += src.second * cols(k);
    }
    return x;
  }

  Vector dual() const {
    Vector y(m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      y(i) = -row_sign_[static_cast<std::size_t>(i)] * t_(m_, unit_col_[static_cast<std::size_t>(i)]);
    }
    return y;
  }

 private:
  void pivot(Eigen::Index r, Eigen::Index c) {
    const double pivot_value = t_(r, c);
    t_.row(r) /= pivot_value;
    Vector factors = t_.col(c);
    factors(r) = 0.0;
    const Eigen::RowVectorXd pivot_row = t_.row(r);
    t_.noalias() -= factors * pivot_row;
    t_(r, c) = 1.0;
    basis_[static_cast<std::size_t>(r)] = c;
  }

  Eigen::Index m_;
  Eigen::Index n_struct_ = 0;
  Eigen::Index art_begin_ = 0;
  Eigen::Index rhs_col_ = 0;
  RowMatrix t_;
  std::vector<std::pair<Eigen::Index, double>> column_source_;
  std::vector<double> row_sign_;
  std::vector<Eigen::Index> basis_;
  std::vector<Eigen::Index> unit_col_;
};

void fill_certificate(const LpProblem& lp, LpSolution& sol) {
  const Vector slack = lp.rhs - lp.constraints * sol.x;
  double primal = std::max(0.0, -slack.minCoeff());
  const Vector reduced = lp.objective - lp.constraints.transpose() * sol.dual;
  double dual_infeasible = std::max(0.0, sol.dual.maxCoeff());
  double slackness = 0.0;
  for (Eigen::Index i = 0; i < slack.size(); ++i) slackness = std::max(slackness, std::abs(sol.dual(i) * slack(i)));
  for (Eigen::Index j = 0; j < lp.num_vars(); ++j) {
    const bool is_free = !lp.free_var.empty() && lp.free_var[static_cast<std::size_t>(j)];
    if (is_free) {
      dual_infeasible += std::abs(reduced(j));
    } else {
      primal = std::max(primal, -sol.x(j));
      dual_infeasible += std::max(0.0, -reduced(j));
    }
    slackness = std::max(slackness, std::abs(sol.x(j) * reduced(j)));
  }
  sol.objective = lp.objective.dot(sol.x);
  sol.dual_objective = lp.rhs.dot(sol.dual);
  sol.primal_residual = primal;
  sol.slackness_residual = slackness;
  sol.gap = std::abs(sol.objective - sol.dual_objective) + dual_infeasible;
}

}  // namespace

LpSolution simplex_solve(const LpProblem& problem) {
  problem.validate();
  LpSolution sol;
  Tableau tab(problem);
  int pivots = 0;
  if (tab.has_artificials()) {
    tab.set_costs(tab.phase1_costs());
    const LpStatus s1 = tab.optimize(tab.num_cols(), pivots);
    if (s1 == LpStatus::kIterationCap) {
      sol.status = s1;
      sol.pivots = pivots;
      return sol;
    }
    const double scale = 1.0 + problem.rhs.cwiseAbs().maxCoeff();
    if (tab.objective_value() > tol::kLpFeasibility * scale) {
      sol.status = LpStatus::kInfeasible;
      sol.pivots = pivots;
      return sol;
    }
    tab.drive_out_artificials(pivots);
  }
  tab.set_costs(tab.phase2_costs(problem));
  sol.status = tab.optimize(tab.art_begin(), pivots);
  sol.pivots = pivots;
  if (sol.status != LpStatus::kOptimal) return sol;
  sol.x = tab.primal(problem);
  sol.dual = tab.dual();
  fill_certificate(problem, sol);
  return sol;
}

void perturbation_box(const Vector& x, double epsilon, Vector& lo, Vector& hi) {
  lo = (-0.5 - x.array()).max(-epsilon).matrix();
  hi = (0.5 - x.array()).min(epsilon).matrix();
  // x may sit a rounding error outside the cube; keep 0 inside the box.
  lo = lo.cwiseMin(0.0);
  hi = hi.cwiseMax(0.0);
}

BoxProjection box_intersection_project(const Matrix& basis, const Vector& target, const Vector& lo,
                                       const Vector& hi) {
  const Eigen::Index d = basis.rows();
  require_dim(target.size(), basis.cols(), "box_intersection_project target");
  require_dim(lo.size(), d, "box_intersection_project lo");
  require_dim(hi.size(), d, "box_intersection_project hi");
  if ((lo.array() > 0.0).any() || (hi.array() < 0.0).any()) {
    throw std::invalid_argument("box_intersection_project: box must contain the origin");
  }
  BoxProjection out;
  if (basis.cols() == 0) {
    out.coefficients = Vector::Zero(0);
    out.converged = true;
    return out;
  }

  auto project_subspace = [&](const Vector& v) -> Vector { return basis * (basis.transpose() * v); };
  auto clip = [&](const Vector& v) -> Vector { return v.cwiseMax(lo).cwiseMin(hi); };

  Vector z = basis * target;
  Vector p = Vector::Zero(d);
  Vector q = Vector::Zero(d);
  Vector y(d);
  for (int it = 1; it <= tol::kQpMaxIterations; ++it) {
    y = project_subspace(z + p);
    p = z + p - y;
    Vector z_next = clip(y + q);
    q = y + q - z_next;
    const double step = (z_next - z).lpNorm<Eigen::Infinity>();
    const double off_subspace = (z_next - y).lpNorm<Eigen::Infinity>();
    z = std::move(z_next);
    out.iterations = it;
    if (step < tol::kQpStep && off_subspace < tol::kQpStep) {
      out.converged = true;
      break;
    }
  }

  Vector coeffs = basis.transpose() * z;
  const Vector delta = basis * coeffs;
  double theta = 1.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (delta(i) > hi(i)) theta = std::min(theta, hi(i) / delta(i));
    if (delta(i) < lo(i)) theta = std::min(theta, lo(i) / delta(i));
  }
  theta = std::max(0.0, theta);
  out.feasibility_scale = theta;
  out.coefficients = theta * coeffs;
  return out;
}

}  // namespace prs
