#include "prs/smoothing.hpp"

#include "prs/rng.hpp"
#include "prs/special.hpp"

#include <algorithm>
#include <cmath>

namespace prs {

ProjectedHardClassifier::ProjectedHardClassifier(const MlpClassifier& model, const ProjectionBasis& basis)
    : model_(model), basis_(basis) {
  require_dim(basis.ambient_dim(), model.input_dim(), "ProjectedHardClassifier basis");
}

void ProjectedHardClassifier::classify(const Matrix& batch, std::span<int> out) const {
  require_dim(batch.cols(), basis_.projected_dim(), "ProjectedHardClassifier batch width");
  model_.predict_batch(batch * basis_.u().transpose(), out);
}

void FunctionClassifier::classify(const Matrix& batch, std::span<int> out) const {
  require_dim(batch.cols(), dim_, "FunctionClassifier batch width");
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = fn_(batch.row(i).transpose());
  }
}

void SmoothingParams::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("SmoothingParams: sigma must be positive");
  if (n0 < 1 || n < 1) throw std::invalid_argument("SmoothingParams: n0 and n must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("SmoothingParams: alpha must lie in (0, 1)");
  if (batch_size < 1) throw std::invalid_argument("SmoothingParams: batch_size must be positive");
}

std::vector<std::int64_t> sample_counts(const BatchClassifier& f, const Vector& x, const SmoothingParams& prm,
                                        std::int64_t num, SamplingPhase phase, std::uint64_t input_id) {
  require_dim(x.size(), f.input_dim(), "smoothing input");
  const Eigen::Index dim = x.size();
  const std::uint64_t stream = hash_key(input_id, static_cast<std::uint64_t>(phase));
  std::vector<std::int64_t> counts(static_cast<std::size_t>(f.num_classes()), 0);
  std::vector<int> labels;
  Matrix batch;
  for (std::int64_t start = 0; start < num; start += prm.batch_size) {
    const std::int64_t bsz = std::min(prm.batch_size, num - start);
    batch.resize(bsz, dim);
    for (std::int64_t j = 0; j < bsz; ++j) {
      CounterRng rng(prm.seed, stream, static_cast<std::uint64_t>(start + j));
      for (Eigen::Index k = 0; k < dim; ++k) batch(j, k) = x(k) + prm.sigma * rng.normal();
    }
    labels.assign(static_cast<std::size_t>(bsz), 0);
    f.classify(batch, labels);
    for (int c : labels) {
      if (c < 0 || c >= f.num_classes()) throw std::out_of_range("classifier returned an invalid class");
      ++counts[static_cast<std::size_t>(c)];
    }
  }
  return counts;
}

namespace {

// Index of the largest count; ties go to the lowest class.
int top_class(const std::vector<std::int64_t>& counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace

SmoothOutcome smooth_predict(const BatchClassifier& f, const Vector& x, const SmoothingParams& prm,
                             std::uint64_t input_id) {
  prm.validate();
  std::vector<std::int64_t> counts = sample_counts(f, x, prm, prm.n, SamplingPhase::kPredict, input_id);
  const int top = top_class(counts);
  const std::int64_t n_a = counts[static_cast<std::size_t>(top)];
  std::int64_t n_b = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (static_cast<int>(c) != top) n_b = std::max(n_b, counts[c]);
  }
  if (binomial_test_two_sided(n_a, n_a + n_b) > prm.alpha) return SmoothOutcome::abstained();
  SmoothOutcome out;
  out.abstain = false;
  out.predicted = top;
  out.top_count = n_a;
  return out;
}

SmoothOutcome smooth_certify(const BatchClassifier& f, const Vector& x, const SmoothingParams& prm,
                             std::uint64_t input_id) {
  prm.validate();
  const auto guess = sample_counts(f, x, prm, prm.n0, SamplingPhase::kSelect, input_id);
  const int candidate = top_class(guess);
  const auto counts = sample_counts(f, x, prm, prm.n, SamplingPhase::kEstimate, input_id);
  const std::int64_t n_a = counts[static_cast<std::size_t>(candidate)];
  const double pa_lower = clopper_pearson_lower(n_a, prm.n, prm.alpha);
  if (!(pa_lower > 0.5)) return SmoothOutcome::abstained();
  SmoothOutcome out;
  out.abstain = false;
  out.predicted = candidate;
  out.pa_lower = pa_lower;
  out.radius = prm.sigma * normal_quantile(pa_lower);
  out.top_count = n_a;
  return out;
}

SmoothOutcome project_certify(const MlpClassifier& model, const ProjectionBasis& basis, const Vector& x,
                              const SmoothingParams& prm, std::uint64_t input_id) {
  const ProjectedHardClassifier f(model, basis);
  return smooth_certify(f, basis.project(x), prm, input_id);
}

SmoothOutcome project_predict(const MlpClassifier& model, const ProjectionBasis& basis, const Vector& x,
                              const SmoothingParams& prm, std::uint64_t input_id) {
  const ProjectedHardClassifier f(model, basis);
  return smooth_predict(f, basis.project(x), prm, input_id);
}

SmoothOutcome ambient_certify(const MlpClassifier& model, const Vector& x, const SmoothingParams& prm,
                              std::uint64_t input_id) {
  return smooth_certify(MlpHardClassifier(model), x, prm, input_id);
}

SmoothOutcome ambient_predict(const MlpClassifier& model, const Vector& x, const SmoothingParams& prm,
                              std::uint64_t input_id) {
  return smooth_predict(MlpHardClassifier(model), x, prm, input_id);
}

}  // namespace prs
