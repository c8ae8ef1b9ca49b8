#pragma once

#include "prs/attack.hpp"
#include "prs/classifier.hpp"
#include "prs/common.hpp"
#include "prs/data.hpp"
#include "prs/projection.hpp"
#include "prs/smoothing.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace prs {

/// Invalid or unknown configuration entry. `key()` names the offending key.
class ConfigError : public FormatError {
 public:
  ConfigError(std::string key, const std::string& message)
      : FormatError("config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Experiment configuration read from `key = value` lines (`#` starts a
/// comment). Numbers may be written as fractions such as `8/255`; lists are
/// comma separated. Unknown keys are rejected.
struct RunConfig {
  // Dataset: loaded from CSV when data.train is set, generated otherwise.
  std::string train_path;
  std::string test_path;
  bool rescale = false;
  LowRankParams data;
  Eigen::Index n_train = 4000;
  Eigen::Index n_test = 1000;

  BasisKind basis_kind = BasisKind::kPca;
  /// Projected dimension; 0 selects it from basis_variance.
  Eigen::Index p = 8;
  double basis_variance = 0.99;
  double pca_subset_fraction = 1.0;

  std::vector<int> hidden{64};
  Activation activation = Activation::kTanh;
  std::string model_path;
  TrainConfig train;
  bool finetune_enabled = true;
  TrainConfig finetune;

  SmoothingParams smoothing;
  Eigen::Index certify_count = 200;

  std::vector<double> attack_epsilons;
  double attack_variance = 0.99;
  SweepSettings sweep;

  std::vector<Eigen::Index> sweep_p;
  std::vector<Eigen::Index> ratio_d;
  std::vector<Eigen::Index> ratio_p;
  double ratio_radius = 0.5;
  double ratio_t = 0.4;
  Eigen::Index ablation_pca_p = 8;
  Eigen::Index ablation_random_p = 32;

  std::uint64_t seed = 0;
  int threads = 1;

  /// Every key that was set explicitly, as written.
  std::map<std::string, std::string> entries;

  /// Re-derives all component seeds from the global seed.
  void apply_seed(std::uint64_t global_seed);
  /// Canonical `key = value` text of the explicit entries plus the seed.
  std::string canonical_text() const;
  /// Cross-field checks; throws ConfigError.
  void validate() const;
};

RunConfig default_config();
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// All accepted keys, for documentation and validation.
const std::vector<std::string>& config_keys();

/// 64-bit FNV-1a; used for config hashes in run manifests.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace prs
