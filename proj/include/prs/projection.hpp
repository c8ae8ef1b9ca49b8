#pragma once

#include "prs/common.hpp"

#include <cstdint>
#include <string>

namespace prs {

enum class BasisKind { kPca, kRandom, kIdentitySlice };

const char* to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

/// A d x p matrix U with orthonormal columns together with an orthonormal basis
/// V (d x (d - p)) of the nullspace of U'. Immutable once built.
///
/// The public constructors require p < d. `identity_slice` also admits p == d,
/// which gives an empty V and makes the projection the identity.
class ProjectionBasis {
 public:
  ProjectionBasis(Matrix u, Matrix v, BasisKind kind, std::uint64_t seed = 0, Vector mean = {});

  Eigen::Index ambient_dim() const { return u_.rows(); }
  Eigen::Index projected_dim() const { return u_.cols(); }
  const Matrix& u() const { return u_; }
  const Matrix& v() const { return v_; }
  BasisKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  /// Training mean for PCA bases (diagnostic only; projection never centers).
  const Vector& mean() const { return mean_; }

  /// U'x.
  Vector project(const Vector& x) const;
  /// U x~.
  Vector reconstruct(const Vector& x_tilde) const;
  /// U U'x.
  Vector project_reconstruct(const Vector& x) const;

  /// Largest entrywise deviation from U'U = I, V'V = I and U'V = 0.
  double orthonormality_error() const;

 private:
  Matrix u_;
  Matrix v_;
  BasisKind kind_;
  std::uint64_t seed_;
  Vector mean_;
};

/// Orthonormal completion of the columns of `u` by Householder QR.
Matrix nullspace_basis(const Matrix& u);

/// Top-p principal components of the rows of `data` (mean subtracted).
ProjectionBasis fit_pca(const Matrix& data, Eigen::Index p);

/// Eigen-decomposition of the sample covariance: eigenvalues in descending
/// order and matching eigenvectors with the deterministic sign convention.
struct PcaSpectrum {
  Vector eigenvalues;
  Matrix eigenvectors;
  Vector mean;
};
PcaSpectrum pca_spectrum(const Matrix& data);

/// Smallest p whose leading eigenvalues explain at least `fraction` of the variance.
Eigen::Index components_for_variance(const Vector& eigenvalues, double fraction);

/// Orthonormalized d x p Gaussian matrix, deterministic in `seed`.
ProjectionBasis random_basis(Eigen::Index d, Eigen::Index p, std::uint64_t seed);

/// U = first p standard basis vectors (p <= d).
ProjectionBasis identity_slice(Eigen::Index d, Eigen::Index p);

}  // namespace prs
