#include "prs/projection.hpp"

#include "prs/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace prs {

const char* to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::kPca: return "pca";
    case BasisKind::kRandom: return "random";
    case BasisKind::kIdentitySlice: return "identity";
  }
  return "unknown";
}

BasisKind basis_kind_from_string(const std::string& name) {
  if (name == "pca") return BasisKind::kPca;
  if (name == "random") return BasisKind::kRandom;
  if (name == "identity") return BasisKind::kIdentitySlice;
  throw std::invalid_argument("unknown basis kind '" + name + "' (expected pca, random or identity)");
}

ProjectionBasis::ProjectionBasis(Matrix u, Matrix v, BasisKind kind, std::uint64_t seed, Vector mean)
    : u_(std::move(u)), v_(std::move(v)), kind_(kind), seed_(seed), mean_(std::move(mean)) {
  const Eigen::Index d = u_.rows();
  const Eigen::Index p = u_.cols();
  if (d < 1 || p < 1 || p > d) throw DimensionError("ProjectionBasis: need 1 <= p <= d");
  if (v_.rows() != d || v_.cols() != d - p) throw DimensionError("ProjectionBasis: V must be d x (d - p)");
  if (p == d && kind_ != BasisKind::kIdentitySlice) throw DimensionError("ProjectionBasis: p = d is reserved for identity slices");
  if (mean_.size() != 0) require_dim(mean_.size(), d, "ProjectionBasis mean");
  if (!(orthonormality_error() <= 1e-8)) throw NumericalError("ProjectionBasis: columns are not orthonormal");
}

Vector ProjectionBasis::project(const Vector& x) const {
  require_dim(x.size(), ambient_dim(), "project");
  return u_.transpose() * x;
}

Vector ProjectionBasis::reconstruct(const Vector& x_tilde) const {
  require_dim(x_tilde.size(), projected_dim(), "reconstruct");
  return u_ * x_tilde;
}

Vector ProjectionBasis::project_reconstruct(const Vector& x) const { return reconstruct(project(x)); }

double ProjectionBasis::orthonormality_error() const {
  const Eigen::Index p = projected_dim();
  const Eigen::Index k = v_.cols();
  double err = (u_.transpose() * u_ - Matrix::Identity(p, p)).cwiseAbs().maxCoeff();
  if (k > 0) {
    err = std::max(err, (v_.transpose() * v_ - Matrix::Identity(k, k)).cwiseAbs().maxCoeff());
    err = std::max(err, (u_.transpose() * v_).cwiseAbs().maxCoeff());
  }
  return err;
}

Matrix nullspace_basis(const Matrix& u) {
  const Eigen::Index d = u.rows();
  const Eigen::Index p = u.cols();
  if (p >= d) return Matrix(d, 0);
  Eigen::HouseholderQR<Matrix> qr(u);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  return q.rightCols(d - p);
}

namespace {

// Flip each column so its largest-magnitude entry is positive (first index wins ties).
void canonicalize_signs(Matrix& vecs) {
  for (Eigen::Index j = 0; j < vecs.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
      if (std::abs(vecs(i, j)) > best * (1.0 + 1e-12)) {
        best = std::abs(vecs(i, j));
        arg = i;
      }
    }
    if (vecs(arg, j) < 0.0) vecs.col(j) *= -1.0;
  }
}

void check_dims(Eigen::Index d, Eigen::Index p, const char* who) {
  if (p < 1 || p >= d) {
    throw DimensionError(std::string(who) + ": projected dimension p=" + std::to_string(p) +
                         " must satisfy 1 <= p < d=" + std::to_string(d));
  }
}

}  // namespace

PcaSpectrum pca_spectrum(const Matrix& data) {
  if (data.rows() < 2) throw std::invalid_argument("pca: need at least two samples");
  PcaSpectrum out;
  out.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - out.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(data.rows() - 1);
  // Householder tridiagonalization followed by implicit symmetric QR.
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericalError("pca: eigendecomposition failed");
  const Eigen::Index d = cov.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Vector& evals = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return evals(a) > evals(b); });
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.eigenvalues(j) = evals(src);
    out.eigenvectors.col(j) = solver.eigenvectors().col(src);
  }
  canonicalize_signs(out.eigenvectors);
  return out;
}

Eigen::Index components_for_variance(const Vector& eigenvalues, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("variance fraction must lie in (0, 1]");
  const Vector clipped = eigenvalues.cwiseMax(0.0);
  const double total = clipped.sum();
  if (total <= 0.0) return 1;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < clipped.size(); ++j) {
    acc += clipped(j);
    if (acc >= fraction * total * (1.0 - 1e-12)) return j + 1;
  }
  return clipped.size();
}

ProjectionBasis fit_pca(const Matrix& data, Eigen::Index p) {
  check_dims(data.cols(), p, "fit_pca");
  PcaSpectrum spec = pca_spectrum(data);
  Matrix u = spec.eigenvectors.leftCols(p);
  Matrix v = nullspace_basis(u);
  return ProjectionBasis(std::move(u), std::move(v), BasisKind::kPca, 0, std::move(spec.mean));
}

ProjectionBasis random_basis(Eigen::Index d, Eigen::Index p, std::uint64_t seed) {
  check_dims(d, p, "random_basis");
  CounterRng rng(seed, 0x5eed'ba5eULL);
  Matrix g(d, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  // Fix the column signs against R's diagonal so U is the Gram-Schmidt
  // orthonormalization of G (and hence Haar-distributed).
  Matrix u = q.leftCols(p);
  const Matrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (r(j, j) < 0.0) u.col(j) *= -1.0;
  }
  return ProjectionBasis(u, q.rightCols(d - p), BasisKind::kRandom, seed);
}

ProjectionBasis identity_slice(Eigen::Index d, Eigen::Index p) {
  if (p < 1 || p > d) throw DimensionError("identity_slice: need 1 <= p <= d");
  const Matrix eye = Matrix::Identity(d, d);
  return ProjectionBasis(eye.leftCols(p), eye.rightCols(d - p), BasisKind::kIdentitySlice, 0);
}

}  // namespace prs
