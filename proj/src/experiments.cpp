#include "prs/experiments.hpp"

#include "prs/rng.hpp"
#include "prs/serialize.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace prs {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

}  // namespace

std::uint64_t model_init_seed(const RunConfig& cfg) { return hash_key(cfg.seed, 1); }
std::uint64_t random_basis_seed(const RunConfig& cfg) { return hash_key(cfg.seed, 6); }
std::uint64_t pca_subset_seed(const RunConfig& cfg) { return hash_key(cfg.seed, 7); }

DatasetSplit prepare_data(const RunConfig& cfg) {
  if (!cfg.train_path.empty()) {
    DatasetSplit split{load_csv(cfg.train_path, cfg.rescale), load_csv(cfg.test_path, cfg.rescale)};
    if (split.train.dim() != split.test.dim()) {
      throw ConfigError("data.test", "feature count differs from data.train");
    }
    const int classes = std::max(split.train.num_classes, split.test.num_classes);
    split.train.num_classes = classes;
    split.test.num_classes = classes;
    return split;
  }
  LowRankParams params = cfg.data;
  params.num_samples = cfg.n_train + cfg.n_test;
  return gen_lowrank_split(params, cfg.n_train, cfg.n_test);
}

ProjectionBasis build_basis(const RunConfig& cfg, const Dataset& train, BasisKind kind, Eigen::Index p,
                            double variance) {
  const Eigen::Index d = train.dim();
  Matrix rows = train.inputs;
  if (kind == BasisKind::kPca && cfg.pca_subset_fraction < 1.0) {
    const auto n = train.size();
    const auto keep = std::max<Eigen::Index>(2, static_cast<Eigen::Index>(std::ceil(cfg.pca_subset_fraction * n)));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(pca_subset_seed(cfg));
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    rows.resize(keep, d);
    for (Eigen::Index i = 0; i < keep; ++i) rows.row(i) = train.inputs.row(order[static_cast<std::size_t>(i)]);
  }
  if (p == 0) {
    if (kind != BasisKind::kPca) throw ConfigError("basis.p", "p = 0 requires a PCA basis");
    p = components_for_variance(pca_spectrum(rows).eigenvalues, variance);
    p = std::min(p, d - 1);
  }
  if (p >= d && kind != BasisKind::kIdentitySlice) {
    throw ConfigError("basis.p", "must be smaller than the input dimension " + std::to_string(d));
  }
  switch (kind) {
    case BasisKind::kPca: return fit_pca(rows, p);
    case BasisKind::kRandom: return random_basis(d, p, random_basis_seed(cfg));
    case BasisKind::kIdentitySlice: return identity_slice(d, p);
  }
  throw std::logic_error("unknown basis kind");
}

MlpClassifier train_base_model(const RunConfig& cfg, const Dataset& train, double noise_sigma) {
  std::vector<int> dims{static_cast<int>(train.dim())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(train.num_classes);
  TrainConfig tc = cfg.train;
  tc.noise_sigma = noise_sigma;
  return prs::train(MlpClassifier::initialize(dims, cfg.activation, model_init_seed(cfg)), train, tc);
}

MlpClassifier finetune_model(const RunConfig& cfg, const MlpClassifier& base, const ProjectionBasis& basis,
                             const Dataset& train) {
  if (!cfg.finetune_enabled) return base;
  return finetune_on_reconstruction(base, basis, train, cfg.finetune);
}

double CertifiedInput::ambient_log10_volume(Eigen::Index d) const {
  if (ambient.abstain) return kNegInf;
  return l2_ball_volume_log10(d, ambient.radius);
}

std::vector<CertifiedInput> run_certification(const MlpClassifier* projected_model, const ProjectionBasis& basis,
                                              const MlpClassifier* ambient, const Dataset& test,
                                              Eigen::Index count, const SmoothingParams& prm, int threads) {
  count = std::min(count, test.size());
  std::vector<CertifiedInput> rows(static_cast<std::size_t>(count));
  parallel_for(count, threads, [&](Eigen::Index i) {
    const Vector x = test.input(i);
    auto& row = rows[static_cast<std::size_t>(i)];
    const auto id = static_cast<std::uint64_t>(i);
    row.label = test.labels[static_cast<std::size_t>(i)];
    if (projected_model != nullptr) {
      row.projected = certify_projected(*projected_model, basis, x, prm, id);
      row.has_projected = true;
    }
    if (ambient != nullptr) {
      row.ambient = ambient_certify(*ambient, x, prm, id);
      row.has_ambient = true;
    }
  });
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) return kNegInf;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  if (std::isinf(values[mid - 1]) || std::isinf(values[mid])) return std::min(values[mid - 1], values[mid]);
  return 0.5 * (values[mid - 1] + values[mid]);
}

MethodSummary summarize(const std::vector<double>& log10_volumes, const std::vector<bool>& correct) {
  require_dim(static_cast<Eigen::Index>(correct.size()), static_cast<Eigen::Index>(log10_volumes.size()),
              "summarize");
  MethodSummary s;
  s.total = static_cast<Eigen::Index>(correct.size());
  std::vector<double> kept;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    if (correct[i]) kept.push_back(log10_volumes[i]);
  }
  s.correct = static_cast<Eigen::Index>(kept.size());
  s.accuracy = s.total > 0 ? static_cast<double>(s.correct) / static_cast<double>(s.total) : 0.0;
  s.median_log10_volume = median(std::move(kept));
  return s;
}

MethodSummary summarize_projected(const std::vector<CertifiedInput>& rows) {
  std::vector<double> vol;
  std::vector<bool> ok;
  for (const auto& r : rows) {
    vol.push_back(r.projected.log10_volume);
    ok.push_back(r.projected_correct());
  }
  return summarize(vol, ok);
}

MethodSummary summarize_ambient(const std::vector<CertifiedInput>& rows, Eigen::Index d) {
  std::vector<double> vol;
  std::vector<bool> ok;
  for (const auto& r : rows) {
    vol.push_back(r.ambient_log10_volume(d));
    ok.push_back(r.ambient_correct());
  }
  return summarize(vol, ok);
}

std::vector<CurvePoint> certified_accuracy_curve(const std::vector<double>& log10_volumes,
                                                 const std::vector<bool>& correct,
                                                 const std::vector<double>& thresholds) {
  require_dim(static_cast<Eigen::Index>(correct.size()), static_cast<Eigen::Index>(log10_volumes.size()),
              "certified_accuracy_curve");
  std::vector<CurvePoint> curve;
  const auto n = static_cast<double>(correct.size());
  for (double thr : thresholds) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < correct.size(); ++i) hits += correct[i] && log10_volumes[i] >= thr;
    curve.push_back({thr, n > 0 ? static_cast<double>(hits) / n : 0.0});
  }
  return curve;
}

std::vector<double> curve_thresholds(const std::vector<std::vector<double>>& volume_sets, int count) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& set : volume_sets) {
    for (double v : set) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo <= hi)) return {};
  if (count < 2 || lo == hi) return {lo};
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(lo + (hi - lo) * i / (count - 1));
  return out;
}

std::vector<RatioCell> ratio_grid(const std::vector<Eigen::Index>& d_values, const std::vector<Eigen::Index>& p_values,
                                  double radius, double t) {
  std::vector<RatioCell> cells;
  for (auto d : d_values) {
    for (auto p : p_values) {
      if (p >= d) continue;
      RatioCell c;
      c.d = d;
      c.p = p;
      c.log10_projected = projected_volume_log10(d, p, radius, t);
      c.log10_ball = l2_ball_volume_log10(d, radius);
      c.log10_ratio = volume_ratio_log10(d, p, radius, t, radius);
      cells.push_back(c);
    }
  }
  return cells;
}

double recheck_certificate(const Certificate& cert, const ProjectionBasis& basis, const Vector& x) {
  if (cert.abstain) return kNegInf;
  const double t = linf_distance(x, basis.v()).t;
  return volume_bound(basis.ambient_dim(), basis.projected_dim(), cert.radius_raw, t).log10_volume;
}

void write_certificates_csv(const std::vector<CertifiedInput>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "input_id,label,predicted,abstain,R_raw,R_clamped,t,lp_gap,r_star,log10_volume,log10_l2_ball_volume,"
         "log10_ratio\n";
  for (const auto& r : rows) {
    const auto& c = r.projected;
    out << c.input_id << ',' << r.label << ',' << c.predicted << ',' << (c.abstain ? 1 : 0) << ','
        << format_double(c.radius_raw) << ',' << (c.radius_clamped ? 1 : 0) << ',' << format_double(c.t) << ','
        << format_double(c.lp_gap) << ',' << format_double(c.r_star) << ',' << format_double(c.log10_volume)
        << ',' << format_double(c.log10_l2_ball_volume) << ',' << format_double(c.log10_ratio) << '\n';
  }
}

void write_certification_log(const std::vector<CertifiedInput>& rows, const SmoothingParams& prm, Eigen::Index d,
                             const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "input_id,label,method,predicted,abstain,pA_lower,R,log10_volume,sigma,n0,n,alpha,seed\n";
  std::uint64_t id = 0;
  for (const auto& r : rows) {
    const auto emit = [&](const char* method, int predicted, bool abstain, double pa, double radius, double vol) {
      out << id << ',' << r.label << ',' << method << ',' << predicted << ',' << (abstain ? 1 : 0) << ','
          << format_double(pa) << ',' << format_double(radius) << ',' << format_double(vol) << ','
          << format_double(prm.sigma) << ',' << prm.n0 << ',' << prm.n << ',' << format_double(prm.alpha) << ','
          << prm.seed << '\n';
    };
    if (r.has_projected) {
      emit("projected", r.projected.predicted, r.projected.abstain, r.projected.pa_lower, r.projected.radius_raw,
           r.projected.log10_volume);
    }
    if (r.has_ambient) {
      emit("ambient", r.ambient.predicted, r.ambient.abstain, r.ambient.pa_lower, r.ambient.radius,
           r.ambient_log10_volume(d));
    }
    ++id;
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "family,epsilon,n_inputs,success_rate,mean_linf_residual,mean_cube_residual,mean_nullspace_residual\n";
  for (const auto& r : rows) {
    out << to_string(r.family) << ',' << format_double(r.epsilon) << ',' << r.n_inputs << ','
        << format_double(r.success_rate) << ',' << format_double(r.mean_linf_residual) << ','
        << format_double(r.mean_cube_residual) << ',' << format_double(r.mean_nullspace_residual) << '\n';
  }
}

void write_ratio_csv(const std::vector<RatioCell>& cells, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "d,p,log10_projected_volume,log10_l2_ball_volume,log10_ratio\n";
  for (const auto& c : cells) {
    out << c.d << ',' << c.p << ',' << format_double(c.log10_projected) << ',' << format_double(c.log10_ball)
        << ',' << format_double(c.log10_ratio) << '\n';
  }
}

void write_gnuplot_stub(const std::filesystem::path& path, const std::string& csv_name, const std::string& xlabel,
                        const std::string& ylabel, int x_column, int y_column, int group_column) {
  auto out = open_out(path);
  out << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set xlabel '" << xlabel << "'\n"
      << "set ylabel '" << ylabel << "'\n"
      << "set terminal pngcairo size 800,500\n"
      << "set output '" << std::filesystem::path(csv_name).stem().string() << ".png'\n";
  if (group_column > 0) {
    out << "groups = system(\"tail -n +2 " << csv_name << " | cut -d, -f" << group_column << " | sort -u\")\n"
        << "plot for [g in groups] '" << csv_name << "' using " << x_column << ":(strcol(" << group_column
        << ") eq g ? $" << y_column << " : NaN) with linespoints title g\n";
  } else {
    out << "plot '" << csv_name << "' using " << x_column << ':' << y_column << " with linespoints\n";
  }
}

void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& files, Eigen::Index d, const std::string& extra_json) {
  const std::string text = cfg.canonical_text();
  nlohmann::ordered_json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config_hash"] = hex64(fnv1a64(text));
  m["config"] = text;
  m["seed"] = cfg.seed;
  m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  m["input_dim"] = d;
  m["log10_unit_ball_volume"] = d > 0 ? l2_ball_volume_log10(d, 1.0) : 0.0;
  m["unit_ball_volume"] = d > 0 ? std::pow(10.0, l2_ball_volume_log10(d, 1.0)) : 0.0;
  m["files"] = files;
  m["details"] = nlohmann::ordered_json::parse(extra_json);
  auto out = open_out(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

}  // namespace prs
