#include "oracles.hpp"

#include "prs/attack.hpp"
#include "prs/certgeom.hpp"
#include "prs/config.hpp"
#include "prs/experiments.hpp"
#include "prs/projection.hpp"
#include "prs/smoothing.hpp"
#include "prs/special.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace prs;

namespace {

// Tolerances and sizes, fixed here so every run judges the same thing.
constexpr int kBoundConfigs = 100;
constexpr int kBoundSamples = 1000000;
constexpr double kZ99 = 2.5758293035489004;
constexpr int kLpInstances = 200;
constexpr double kLpGridStep = 1e-4;
constexpr double kLpMatchTol = 1e-4;
constexpr double kLpGapTol = 1e-7;
constexpr int kRadiusCases = 500;
constexpr int kRadiusGrid = 10000;
constexpr double kRadiusTol = 1e-4;
constexpr int kCoverageRuns = 1000;
constexpr double kCoverageAlpha = 0.05;
constexpr double kClosedFormTol = 1e-6;
constexpr int kRegionSamples = 10000;
constexpr double kRegionTol = 1e-9;
constexpr int kAttackInputs = 100;
constexpr double kAttackTol = 1e-9;
constexpr double kAttackNullTol = 1e-6;
constexpr double kOrderingMargin = 0.10;
constexpr double kAccuracyDrop = 0.03;
constexpr double kLogGammaRelTol = 1e-10;
constexpr double kQuantileAbsTol = 1e-6;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  char time_buf[32];
  std::snprintf(time_buf, sizeof time_buf, "%.1fs", secs);
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << time_buf << "]" << std::endl;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

Eigen::VectorXd uniform_cube(Eigen::Index d, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Eigen::VectorXd x(d);
  for (Eigen::Index i = 0; i < d; ++i) x(i) = u(gen);
  return x;
}

ProjectionBasis basis_from(const Eigen::MatrixXd& u) { return ProjectionBasis(u, oracle::complement(u), BasisKind::kRandom); }

Outcome bound_soundness() {
  std::mt19937_64 gen(20240501);
  int ok = 0;
  double worst_margin = 1e300;
  for (int c = 0; c < kBoundConfigs; ++c) {
    const int d = 4 + 2 * (c % 3);
    const int p = 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(d - 1));
    const Eigen::MatrixXd u = oracle::random_orthonormal(d, p, gen);
    const ProjectionBasis basis = basis_from(u);
    const Eigen::VectorXd x = uniform_cube(d, gen);
    const double t = linf_distance(x, basis.v()).t;
    const double radius = std::uniform_real_distribution<double>(0.0, 0.5 - t)(gen);
    const double bound = std::pow(10.0, projected_volume_log10(d, p, radius, t));

    // Membership oracle: y uniform in the cube, inside when |U'(y - x)| <= R.
    std::int64_t hits = 0;
    const double r2 = radius * radius;
    for (int s = 0; s < kBoundSamples; ++s) {
      const Eigen::VectorXd y = uniform_cube(d, gen);
      hits += (u.transpose() * (y - x)).squaredNorm() <= r2;
    }
    // Wilson score upper limit at 99%.
    const double n = kBoundSamples;
    const double ph = static_cast<double>(hits) / n;
    const double z2 = kZ99 * kZ99;
    const double upper =
        (ph + z2 / (2 * n) + kZ99 * std::sqrt(ph * (1 - ph) / n + z2 / (4 * n * n))) / (1 + z2 / n);
    if (upper >= bound) ++ok;
    worst_margin = std::min(worst_margin, upper - bound);
  }
  return {ok == kBoundConfigs,
          std::to_string(ok) + "/" + std::to_string(kBoundConfigs) + " configurations with MC upper 99% limit >= bound, "
                                                                      "smallest margin " + fmt(worst_margin)};
}

// Exhaustive step-1e-4 grid over the square (or segment) of half-width 0.05
// around a golden-section estimate; the objective is 1-Lipschitz in alpha.
double lp_grid(const Eigen::VectorXd& x, const Eigen::MatrixXd& v) {
  const auto k = v.cols();
  const double bound = std::sqrt(static_cast<double>(x.size())) + 0.05;
  auto eval = [&](double a0, double a1) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double val = x(i) + v(i, 0) * a0;
      if (k > 1) val += v(i, 1) * a1;
      m = std::max(m, std::abs(val));
    }
    return m;
  };
  auto argmin = [](const std::function<double(double)>& f, double lo, double hi) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 90; ++i) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      if (f(a) < f(b)) hi = b;
      else lo = a;
    }
    return 0.5 * (lo + hi);
  };
  double c0 = 0.0, c1 = 0.0;
  if (k == 1) {
    c0 = argmin([&](double a) { return eval(a, 0.0); }, -bound, bound);
  } else {
    auto inner = [&](double a0) { return argmin([&](double a1) { return eval(a0, a1); }, -bound, bound); };
    c0 = argmin([&](double a0) { return eval(a0, inner(a0)); }, -bound, bound);
    c1 = inner(c0);
  }
  const int half = static_cast<int>(std::lround(0.05 / kLpGridStep));
  double best = std::numeric_limits<double>::infinity();
  for (int i = -half; i <= half; ++i) {
    if (k == 1) {
      best = std::min(best, eval(c0 + i * kLpGridStep, 0.0));
      continue;
    }
    for (int j = -half; j <= half; ++j) best = std::min(best, eval(c0 + i * kLpGridStep, c1 + j * kLpGridStep));
  }
  return best;
}

Outcome lp_correctness() {
  std::mt19937_64 gen(77);
  int matched = 0, gap_ok = 0;
  double worst_diff = 0.0, worst_gap = 0.0;
  for (int c = 0; c < kLpInstances; ++c) {
    const int d = 2 + c % 3;
    const int k = 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(std::min(2, d - 1)));
    const Eigen::MatrixXd u = oracle::random_orthonormal(d, d - k, gen);
    const Eigen::MatrixXd v = oracle::complement(u);
    const Eigen::VectorXd x = uniform_cube(d, gen);
    const LinfDistance r = linf_distance(x, v);
    const double diff = std::abs(r.t - lp_grid(x, v));
    worst_diff = std::max(worst_diff, diff);
    worst_gap = std::max(worst_gap, r.gap);
    matched += diff <= kLpMatchTol;
    gap_ok += r.gap <= kLpGapTol && r.lower_bound <= r.t + 1e-12;
  }
  return {matched == kLpInstances && gap_ok == kLpInstances,
          std::to_string(matched) + "/" + std::to_string(kLpInstances) + " match the grid (worst " + fmt(worst_diff) +
              "), " + std::to_string(gap_ok) + "/" + std::to_string(kLpInstances) + " with dual gap <= 1e-7 (worst " +
              fmt(worst_gap) + ")"};
}

Outcome optimal_radius_check() {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int ok = 0;
  double worst = 0.0;
  for (int c = 0; c < kRadiusCases; ++c) {
    int d, p;
    double radius, t;
    if (c < 10) {
      // The anchored point; R = 0.5 lies above 1/2 - t and is clamped first.
      d = 64 << (c % 6);
      p = 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(d - 1));
      radius = 0.5;
      t = 0.4;
    } else {
      d = 2 + static_cast<int>(gen() % 3071);
      p = 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(d - 1));
      t = 0.49 * u01(gen);
      radius = (0.5 - t) * u01(gen);
    }
    const VolumeBound vb = volume_bound(d, p, radius, t);
    const double upper = vb.radius_used;
    double best = -std::numeric_limits<double>::infinity(), arg = 0.0;
    for (int i = 1; i <= kRadiusGrid; ++i) {
      const double r = upper * i / kRadiusGrid;
      const double rest = 1.0 - 2.0 * r - 2.0 * t;
      const double h = p * std::log(r) + (rest > 0 ? (d - p) * std::log(rest) : -std::numeric_limits<double>::infinity());
      if (h > best) {
        best = h;
        arg = r;
      }
    }
    const double diff = std::abs(arg - vb.r_star);
    worst = std::max(worst, diff);
    ok += diff <= kRadiusTol && std::abs(vb.r_star - std::min(upper, p * (1 - 2 * t) / (2.0 * d))) <= 1e-15;
  }
  return {ok == kRadiusCases, std::to_string(ok) + "/" + std::to_string(kRadiusCases) +
                                  " grid argmax agrees with min{R, p(1-2t)/(2d)}, worst " + fmt(worst)};
}

Outcome statistical_soundness() {
  const double sigma = 0.25;
  std::ostringstream detail;
  bool pass = true;
  const double sd = std::sqrt(kCoverageAlpha * (1 - kCoverageAlpha) * kCoverageRuns);
  const double needed = (1 - kCoverageAlpha) * kCoverageRuns - 3.0 * sd;
  for (double p_star : {0.6, 0.8, 0.95}) {
    // Class 0 exactly when the first noise coordinate falls below its p*-quantile.
    const double cut = sigma * oracle::normal_quantile(p_star);
    const FunctionClassifier f(2, 2, [cut](const Vector& y) { return y(0) <= cut ? 0 : 1; });
    int covered = 0;
    for (int run = 0; run < kCoverageRuns; ++run) {
      SmoothingParams prm;
      prm.sigma = sigma;
      prm.n0 = 100;
      prm.n = 1000;
      prm.alpha = kCoverageAlpha;
      prm.seed = 1000003ULL * static_cast<std::uint64_t>(run) + static_cast<std::uint64_t>(p_star * 1000);
      const SmoothOutcome o = smooth_certify(f, Vector::Zero(2), prm, static_cast<std::uint64_t>(run));
      const double truth = o.predicted == 1 ? 1 - p_star : p_star;
      covered += o.abstain || o.pa_lower <= truth;
    }
    pass = pass && covered >= needed;
    detail << "p*=" << p_star << ": " << covered << "/" << kCoverageRuns << "; ";
  }
  double worst = 0.0;
  for (std::int64_t n : {10, 100, 1000, 10000, 100000}) {
    for (double a : {0.001, 0.01, 0.05}) {
      worst = std::max(worst, std::abs(clopper_pearson_lower(n, n, a) - std::pow(a, 1.0 / static_cast<double>(n))));
    }
  }
  pass = pass && worst <= kClosedFormTol;
  detail << "need >= " << fmt(needed, 5) << "; closed form k=n worst error " << fmt(worst);
  return {pass, detail.str()};
}

Outcome region_geometry() {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> z;
  int ext = 0, ball = 0;
  for (int s = 0; s < kRegionSamples; ++s) {
    const int d = 4 << (s % 5);
    const int p = 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(d - 1));
    const ProjectionBasis basis = random_basis(d, p, gen());
    const double radius = 0.5 * u01(gen);

    Eigen::VectorXd a(d - p);
    for (int i = 0; i < d - p; ++i) a(i) = z(gen);
    const Eigen::VectorXd along = basis.v() * a.normalized() * (1e3 * u01(gen));
    ext += region_contains(basis, radius, along);

    Eigen::VectorXd w(d);
    for (int i = 0; i < d; ++i) w(i) = z(gen);
    const Eigen::VectorXd inside = w.normalized() * (radius * u01(gen));
    ball += region_contains(basis, radius, inside);
  }
  // The membership slack in use must not exceed the allowed tolerance.
  const ProjectionBasis e = identity_slice(3, 1);
  Eigen::VectorXd just_out = Eigen::VectorXd::Zero(3);
  just_out(0) = 0.2 + 2 * kRegionTol;
  const bool tight = !region_contains(e, 0.2, just_out);
  return {ext == kRegionSamples && ball == kRegionSamples && tight,
          "nullspace directions " + std::to_string(ext) + "/" + std::to_string(kRegionSamples) + ", ball " +
              std::to_string(ball) + "/" + std::to_string(kRegionSamples) + ", R + 2e-9 rejected: " +
              (tight ? "yes" : "no")};
}

struct AttackSetup {
  RunConfig cfg;
  DatasetSplit split;
  MlpClassifier model;
  ProjectionBasis basis;
};

AttackSetup& attack_setup() {
  static AttackSetup setup = [] {
    RunConfig cfg = default_config();
    DatasetSplit split = prepare_data(cfg);
    MlpClassifier model = train_base_model(cfg, split.train, 0.0);
    ProjectionBasis basis = build_basis(cfg, split.train, BasisKind::kPca, 0, cfg.attack_variance);
    return AttackSetup{cfg, std::move(split), std::move(model), std::move(basis)};
  }();
  return setup;
}

Outcome attack_validity() {
  AttackSetup& s = attack_setup();
  int ok = 0;
  double worst_linf = 0.0, worst_cube = 0.0, worst_null = 0.0;
  const double eps = s.cfg.attack_epsilons.back();
  for (int i = 0; i < kAttackInputs; ++i) {
    const Vector x = s.split.test.input(i);
    const int y = s.split.test.labels[static_cast<std::size_t>(i)];
    const double e = eps * (1 + i % 5) / 5.0;
    const AttackResult r = subspace_pgd(s.model, s.basis, x, y, AttackConfig::subspace_defaults(e));
    const double linf = r.delta.cwiseAbs().maxCoeff() - e;
    const double cube = (x + r.delta).cwiseAbs().maxCoeff() - 0.5;
    const double null = (s.basis.u().transpose() * r.delta).norm();
    worst_linf = std::max(worst_linf, linf);
    worst_cube = std::max(worst_cube, cube);
    worst_null = std::max(worst_null, null);
    ok += linf <= kAttackTol && cube <= kAttackTol && null <= kAttackNullTol;
  }
  return {ok == kAttackInputs, std::to_string(ok) + "/" + std::to_string(kAttackInputs) +
                                   " valid; worst |delta|-eps " + fmt(worst_linf) + ", |x+delta|-1/2 " +
                                   fmt(worst_cube) + ", |U'delta| " + fmt(worst_null) + " (p = " +
                                   std::to_string(s.basis.projected_dim()) + ")"};
}

Outcome attack_ordering() {
  AttackSetup& s = attack_setup();
  const double eps = s.cfg.attack_epsilons.back();
  const auto rows = attack_sweep(s.model, s.basis, s.split.test, {eps}, s.cfg.sweep);
  double rate[4] = {0, 0, 0, 0};
  for (const auto& r : rows) rate[static_cast<int>(r.family)] = r.success_rate;
  const double pgd = rate[0], sub = rate[1], rmax = rate[2], runi = rate[3];
  const bool pass = pgd >= sub && sub >= rmax && rmax >= runi && sub - rmax >= kOrderingMargin;
  return {pass, "eps=" + fmt(eps * 255, 3) + "/255 on " + std::to_string(rows.front().n_inputs) +
                    " inputs: PGD " + fmt(pgd) + ", SubspacePGD " + fmt(sub) + ", RandMax " + fmt(rmax) +
                    ", RandUniform " + fmt(runi) + " (p = " + std::to_string(s.basis.projected_dim()) + ")"};
}

Outcome volume_comparison() {
  RunConfig cfg = default_config();
  cfg.p = cfg.data.intrinsic_dim;
  cfg.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (cfg.smoothing.n != 10000 || cfg.smoothing.alpha != 0.001) return {false, "unexpected smoothing defaults"};
  const DatasetSplit split = prepare_data(cfg);
  const MlpClassifier base = train_base_model(cfg, split.train, cfg.train.noise_sigma);
  const ProjectionBasis basis = build_basis(cfg, split.train, BasisKind::kPca, cfg.p, cfg.basis_variance);
  const MlpClassifier tuned = finetune_model(cfg, base, basis, split.train);
  const auto rows = run_certification(&tuned, basis, &base, split.test, cfg.certify_count, cfg.smoothing, cfg.threads);
  const MethodSummary ps = summarize_projected(rows);
  const MethodSummary as = summarize_ambient(rows, split.test.dim());
  const double drop = as.accuracy - ps.accuracy;
  const bool pass = ps.median_log10_volume > as.median_log10_volume && drop <= kAccuracyDrop;
  return {pass, "median log10 volume projected " + fmt(ps.median_log10_volume, 6) + " vs ambient " +
                    fmt(as.median_log10_volume, 6) + "; accuracy " + fmt(ps.accuracy) + " vs " + fmt(as.accuracy) +
                    " (drop " + fmt(100 * drop, 3) + " points) on " + std::to_string(ps.total) + " inputs, p = " +
                    std::to_string(basis.projected_dim()) + ", sigma " + fmt(cfg.smoothing.sigma)};
}

Outcome ratio_growth() {
  // p values whose sweep d = 2p..16p reaches image scale (16p up to 3072).
  std::ostringstream detail;
  bool pass = true;
  for (int p : {32, 64, 128, 192}) {
    double prev = -std::numeric_limits<double>::infinity();
    bool rising = true;
    detail << "p=" << p << ":";
    for (int m : {2, 4, 8, 16}) {
      const double r = volume_ratio_log10(m * p, p, 0.5, 0.4, 0.5);
      rising = rising && r > prev;
      prev = r;
      detail << ' ' << fmt(r, 5);
    }
    detail << "; ";
    pass = pass && rising;
  }
  // Smaller p for reference; there the ratio dips before d reaches about 107.
  detail << "for reference p=8:";
  for (int m : {2, 4, 8, 16}) detail << ' ' << fmt(volume_ratio_log10(m * 8, 8, 0.5, 0.4, 0.5), 5);
  return {pass, detail.str()};
}

Outcome numerical_kernels() {
  std::vector<double> points;
  for (int n = 1; n <= 300; ++n) points.push_back(n);
  for (int n = 0; n < 300; ++n) points.push_back(n + 0.5);
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(-3.0, 3.5);
  while (points.size() < 1000) points.push_back(std::pow(10.0, u(gen)));
  double worst_lg = 0.0;
  for (double x : points) {
    const double want = oracle::log_gamma(x);
    worst_lg = std::max(worst_lg, std::abs(log_gamma(x) - want) / std::max(std::abs(want), 1e-300));
  }
  // Relative error is ill-posed at the zeros x = 1, 2; fall back to absolute there.
  double worst_lg_abs_at_zeros = std::max(std::abs(log_gamma(1.0)), std::abs(log_gamma(2.0)));

  double worst_q = 0.0;
  std::uniform_real_distribution<double> lq(-12.0, -0.30103);
  for (int i = 0; i < 1000; ++i) {
    double q = i < 500 ? (i + 0.5) / 500.0 : std::pow(10.0, lq(gen));
    if (i >= 750) q = 1.0 - q;
    worst_q = std::max(worst_q, std::abs(normal_quantile(q) - oracle::normal_quantile(q)));
  }
  const bool pass = worst_lg <= kLogGammaRelTol && worst_lg_abs_at_zeros <= kLogGammaRelTol && worst_q <= kQuantileAbsTol;
  return {pass, "log_gamma worst relative error " + fmt(worst_lg) + " over 1000 points, normal_quantile worst " +
                    "absolute error " + fmt(worst_q) + " over 1000 points"};
}

}  // namespace

int main() {
  report("bound soundness", bound_soundness);
  report("LP correctness", lp_correctness);
  report("optimal radius", optimal_radius_check);
  report("statistical soundness", statistical_soundness);
  report("certified-region geometry", region_geometry);
  report("SubspacePGD validity", attack_validity);
  report("attack success ordering", attack_ordering);
  report("projected vs ambient certified volume", volume_comparison);
  report("ratio growth in d", ratio_growth);
  report("numerical kernels", numerical_kernels);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
