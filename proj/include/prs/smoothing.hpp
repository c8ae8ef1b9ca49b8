#pragma once

#include "prs/classifier.hpp"
#include "prs/common.hpp"
#include "prs/projection.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace prs {

/// Hard classifier evaluated on a batch of points (one per row).
class BatchClassifier {
 public:
  virtual ~BatchClassifier() = default;
  virtual int input_dim() const = 0;
  virtual int num_classes() const = 0;
  virtual void classify(const Matrix& batch, std::span<int> out) const = 0;
};

/// argmax of the network's softmax, in the ambient space.
class MlpHardClassifier final : public BatchClassifier {
 public:
  explicit MlpHardClassifier(const MlpClassifier& model) : model_(model) {}
  int input_dim() const override { return model_.input_dim(); }
  int num_classes() const override { return model_.num_classes(); }
  void classify(const Matrix& batch, std::span<int> out) const override { model_.predict_batch(batch, out); }

 private:
  const MlpClassifier& model_;
};

/// The network composed with the reconstruction map: x~ -> argmax f(U x~).
class ProjectedHardClassifier final : public BatchClassifier {
 public:
  ProjectedHardClassifier(const MlpClassifier& model, const ProjectionBasis& basis);
  int input_dim() const override { return static_cast<int>(basis_.projected_dim()); }
  int num_classes() const override { return model_.num_classes(); }
  void classify(const Matrix& batch, std::span<int> out) const override;

 private:
  const MlpClassifier& model_;
  const ProjectionBasis& basis_;
};

/// Adapts a per-point function; used for synthetic black boxes.
class FunctionClassifier final : public BatchClassifier {
 public:
  FunctionClassifier(int dim, int classes, std::function<int(const Vector&)> fn)
      : dim_(dim), classes_(classes), fn_(std::move(fn)) {}
  int input_dim() const override { return dim_; }
  int num_classes() const override { return classes_; }
  void classify(const Matrix& batch, std::span<int> out) const override;

 private:
  int dim_;
  int classes_;
  std::function<int(const Vector&)> fn_;
};

struct SmoothingParams {
  double sigma = 0.25;
  std::int64_t n0 = 100;
  std::int64_t n = 10000;
  double alpha = 0.001;
  std::uint64_t seed = 0;
  /// Noise samples per classifier call; does not affect results.
  std::int64_t batch_size = 2000;

  void validate() const;
};

struct SmoothOutcome {
  bool abstain = true;
  int predicted = -1;
  double radius = 0.0;
  double pa_lower = 0.0;
  std::int64_t top_count = 0;

  static SmoothOutcome abstained() { return {}; }
};

/// Which of the independent sampling passes a draw belongs to.
enum class SamplingPhase : std::uint64_t { kPredict = 1, kSelect = 2, kEstimate = 3 };

/// Class counts of f(x + sigma * eps) over `num` draws. Draw j uses the random
/// stream keyed by (seed, input_id, phase, j), so counts do not depend on
/// batching.
std::vector<std::int64_t> sample_counts(const BatchClassifier& f, const Vector& x, const SmoothingParams& prm,
                                        std::int64_t num, SamplingPhase phase, std::uint64_t input_id);

/// Monte Carlo prediction: the top class if a two-sided exact binomial test of
/// the top two counts rejects equality at level alpha, otherwise abstain.
SmoothOutcome smooth_predict(const BatchClassifier& f, const Vector& x, const SmoothingParams& prm,
                             std::uint64_t input_id = 0);

/// Two-phase certification: guess the class from n0 draws, then bound its
/// probability from n fresh draws with a one-sided Clopper-Pearson bound and
/// return radius sigma * Phi^-1(pA_lower) when that bound exceeds 1/2.
SmoothOutcome smooth_certify(const BatchClassifier& f, const Vector& x, const SmoothingParams& prm,
                             std::uint64_t input_id = 0);

/// Certification of f o P~ at U'x with p-dimensional noise.
SmoothOutcome project_certify(const MlpClassifier& model, const ProjectionBasis& basis, const Vector& x,
                              const SmoothingParams& prm, std::uint64_t input_id = 0);
SmoothOutcome project_predict(const MlpClassifier& model, const ProjectionBasis& basis, const Vector& x,
                              const SmoothingParams& prm, std::uint64_t input_id = 0);

/// Standard smoothing in the ambient space.
SmoothOutcome ambient_certify(const MlpClassifier& model, const Vector& x, const SmoothingParams& prm,
                              std::uint64_t input_id = 0);
SmoothOutcome ambient_predict(const MlpClassifier& model, const Vector& x, const SmoothingParams& prm,
                              std::uint64_t input_id = 0);

}  // namespace prs
