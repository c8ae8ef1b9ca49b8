#pragma once

#include "prs/certgeom.hpp"
#include "prs/classifier.hpp"
#include "prs/config.hpp"
#include "prs/data.hpp"
#include "prs/projection.hpp"
#include "prs/smoothing.hpp"

#include <atomic>
#include <exception>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace prs {

/// Runs fn(i) for i in [0, count) on `threads` workers. Results must be
/// written to per-index slots; the first exception is rethrown.
template <typename Fn>
void parallel_for(Eigen::Index count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (Eigen::Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (Eigen::Index i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n = std::min<Eigen::Index>(threads, count);
  for (Eigen::Index t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Component seeds derived from the global seed.
std::uint64_t model_init_seed(const RunConfig& cfg);
std::uint64_t random_basis_seed(const RunConfig& cfg);
std::uint64_t pca_subset_seed(const RunConfig& cfg);

DatasetSplit prepare_data(const RunConfig& cfg);

/// PCA (possibly on a random subset of rows), random, or identity basis.
/// p = 0 picks the smallest PCA dimension covering `variance` of the variance.
ProjectionBasis build_basis(const RunConfig& cfg, const Dataset& train, BasisKind kind, Eigen::Index p,
                            double variance);

MlpClassifier train_base_model(const RunConfig& cfg, const Dataset& train, double noise_sigma);
MlpClassifier finetune_model(const RunConfig& cfg, const MlpClassifier& base, const ProjectionBasis& basis,
                             const Dataset& train);

struct CertifiedInput {
  int label = -1;
  Certificate projected;
  bool has_projected = false;
  SmoothOutcome ambient;
  bool has_ambient = false;
  bool projected_correct() const { return !projected.abstain && projected.predicted == label; }
  bool ambient_correct() const { return !ambient.abstain && ambient.predicted == label; }
  double ambient_log10_volume(Eigen::Index d) const;
};

/// Certifies the first `count` test inputs with projected smoothing of
/// `projected_model` and with standard smoothing of `ambient`; either model may
/// be null to skip that method.
std::vector<CertifiedInput> run_certification(const MlpClassifier* projected_model, const ProjectionBasis& basis,
                                              const MlpClassifier* ambient, const Dataset& test,
                                              Eigen::Index count, const SmoothingParams& prm, int threads);

struct MethodSummary {
  double accuracy = 0.0;
  /// Median over correctly classified inputs; -inf when there are none.
  double median_log10_volume = kNegInf;
  Eigen::Index correct = 0;
  Eigen::Index total = 0;
};

double median(std::vector<double> values);
MethodSummary summarize(const std::vector<double>& log10_volumes, const std::vector<bool>& correct);
MethodSummary summarize_projected(const std::vector<CertifiedInput>& rows);
MethodSummary summarize_ambient(const std::vector<CertifiedInput>& rows, Eigen::Index d);

struct CurvePoint {
  double threshold = 0.0;
  double certified_accuracy = 0.0;
};

/// Fraction of inputs that are correct and whose volume reaches each threshold.
std::vector<CurvePoint> certified_accuracy_curve(const std::vector<double>& log10_volumes,
                                                 const std::vector<bool>& correct,
                                                 const std::vector<double>& thresholds);
/// `count` evenly spaced thresholds covering the finite volumes of correct inputs.
std::vector<double> curve_thresholds(const std::vector<std::vector<double>>& volume_sets, int count);

struct RatioCell {
  Eigen::Index d = 0;
  Eigen::Index p = 0;
  double log10_projected = kNegInf;
  double log10_ball = kNegInf;
  double log10_ratio = 0.0;
};

/// Cells with p < d only.
std::vector<RatioCell> ratio_grid(const std::vector<Eigen::Index>& d_values, const std::vector<Eigen::Index>& p_values,
                                  double radius, double t);

/// Recomputes the log10 volume bound of a certificate row from its radius,
/// the basis and the input.
double recheck_certificate(const Certificate& cert, const ProjectionBasis& basis, const Vector& x);

// Writers. Every CSV has a header row; doubles use the shortest round-trip form.
void write_certificates_csv(const std::vector<CertifiedInput>& rows, const std::filesystem::path& path);
void write_certification_log(const std::vector<CertifiedInput>& rows, const SmoothingParams& prm,
                             Eigen::Index d, const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void write_ratio_csv(const std::vector<RatioCell>& cells, const std::filesystem::path& path);
void write_gnuplot_stub(const std::filesystem::path& path, const std::string& csv_name, const std::string& xlabel,
                        const std::string& ylabel, int x_column, int y_column, int group_column);

/// Run manifest: config hash and text, seed, version, output files, and the
/// log10 unit-ball volume used to normalize volumes at the configured d.
void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& files, Eigen::Index d, const std::string& extra_json = "{}");

inline constexpr const char* kVersion = "1.0.0";

}  // namespace prs
