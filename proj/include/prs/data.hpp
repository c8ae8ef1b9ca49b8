#pragma once

#include "prs/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace prs {

/// Labeled inputs in the zero-centered cube [-1/2, 1/2]^d. Labels are 0-based
/// class indices in [0, num_classes).
struct Dataset {
  Matrix inputs;  // n x d, one input per row
  std::vector<int> labels;
  int num_classes = 0;
  std::string provenance;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
  Vector input(Eigen::Index i) const { return inputs.row(i).transpose(); }

  /// Throws unless labels are in range and every entry lies in the cube.
  void validate() const;
  Dataset subset(Eigen::Index begin, Eigen::Index count) const;
};

struct LowRankParams {
  Eigen::Index dim = 64;
  Eigen::Index intrinsic_dim = 8;
  int num_classes = 4;
  Eigen::Index num_samples = 4000;
  double noise_std = 0.0;
  /// Distance scale between class means inside the subspace, in units of the
  /// within-class standard deviation.
  double separation = 3.0;
  std::uint64_t seed = 0;
};

/// Class-conditional Gaussians inside a random k-dimensional subspace, mapped
/// into the cube by one global affine map (single scale and shift), plus
/// isotropic noise of standard deviation `noise_std` in cube units.
Dataset gen_lowrank(const LowRankParams& params);

/// Generates num_train + num_test samples in one draw (one shared affine map)
/// and splits them in order.
struct DatasetSplit {
  Dataset train;
  Dataset test;
};
DatasetSplit gen_lowrank_split(const LowRankParams& params, Eigen::Index num_train, Eigen::Index num_test);

/// CSV rows are `label,f_1,...,f_d`; an optional header line starting with
/// "label" is skipped. With `rescale`, the observed global min/max are mapped
/// onto [-1/2, 1/2]; otherwise out-of-cube values are an error.
Dataset load_csv(const std::filesystem::path& path, bool rescale = false);
void save_csv(const Dataset& data, const std::filesystem::path& path);

/// JSON sidecar describing a generated dataset.
void save_metadata(const Dataset& data, const LowRankParams& params, const std::filesystem::path& path);

}  // namespace prs
