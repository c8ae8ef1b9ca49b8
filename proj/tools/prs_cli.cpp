#include "prs/certgeom.hpp"
#include "prs/config.hpp"
#include "prs/experiments.hpp"
#include "prs/serialize.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace prs;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Models {
  MlpClassifier base;
  ProjectionBasis basis;
  MlpClassifier finetuned;
};

void log(const std::string& msg) { std::cerr << "[prs] " << msg << '\n'; }

std::string summary_json(const MethodSummary& s) {
  nlohmann::ordered_json j;
  j["accuracy"] = s.accuracy;
  j["median_log10_volume"] = std::isfinite(s.median_log10_volume) ? nlohmann::ordered_json(s.median_log10_volume)
                                                                   : nlohmann::ordered_json("-inf");
  j["correct"] = s.correct;
  j["total"] = s.total;
  return j.dump();
}

Models obtain_models(const RunConfig& cfg, const Dataset& train) {
  if (!cfg.model_path.empty()) {
    const fs::path dir = cfg.model_path;
    log("loading models from " + dir.string());
    return {load_model(dir / "model.bin"), load_basis(dir / "basis.bin"), load_model(dir / "model_finetuned.bin")};
  }
  log("training base model");
  MlpClassifier base = train_base_model(cfg, train, cfg.train.noise_sigma);
  ProjectionBasis basis = build_basis(cfg, train, cfg.basis_kind, cfg.p, cfg.basis_variance);
  log("finetuning on reconstructions, p = " + std::to_string(basis.projected_dim()));
  MlpClassifier tuned = finetune_model(cfg, base, basis, train);
  return {std::move(base), std::move(basis), std::move(tuned)};
}

void write_curves(const fs::path& path, const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves,
                  double log10_unit_ball) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,log10_volume,log10_volume_normalized,certified_accuracy\n";
  for (const auto& [name, curve] : curves) {
    for (const auto& pt : curve) {
      out << name << ',' << format_double(pt.threshold) << ',' << format_double(pt.threshold - log10_unit_ball)
          << ',' << format_double(pt.certified_accuracy) << '\n';
    }
  }
}

std::vector<double> projected_volumes(const std::vector<CertifiedInput>& rows) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.projected.log10_volume);
  return v;
}
std::vector<bool> projected_correct(const std::vector<CertifiedInput>& rows) {
  std::vector<bool> v;
  for (const auto& r : rows) v.push_back(r.projected_correct());
  return v;
}
std::vector<double> ambient_volumes(const std::vector<CertifiedInput>& rows, Eigen::Index d) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.ambient_log10_volume(d));
  return v;
}
std::vector<bool> ambient_correct(const std::vector<CertifiedInput>& rows) {
  std::vector<bool> v;
  for (const auto& r : rows) v.push_back(r.ambient_correct());
  return v;
}

constexpr int kCurvePoints = 200;

int cmd_gen_data(const RunConfig& cfg, const fs::path& out) {
  const DatasetSplit split = prepare_data(cfg);
  save_csv(split.train, out / "train.csv");
  save_csv(split.test, out / "test.csv");
  LowRankParams params = cfg.data;
  params.num_samples = split.train.size();
  save_metadata(split.train, params, out / "train.meta.json");
  params.num_samples = split.test.size();
  save_metadata(split.test, params, out / "test.meta.json");
  write_manifest(out, "gen-data", cfg, {"train.csv", "test.csv", "train.meta.json", "test.meta.json"},
                 split.train.dim());
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& out) {
  const DatasetSplit split = prepare_data(cfg);
  std::vector<double> base_losses;
  std::vector<double> tune_losses;
  std::vector<int> dims{static_cast<int>(split.train.dim())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(split.train.num_classes);
  log("training base model");
  const MlpClassifier base =
      train(MlpClassifier::initialize(dims, cfg.activation, model_init_seed(cfg)), split.train, cfg.train, &base_losses);
  const ProjectionBasis basis = build_basis(cfg, split.train, cfg.basis_kind, cfg.p, cfg.basis_variance);
  MlpClassifier tuned = base;
  if (cfg.finetune_enabled) {
    log("finetuning on reconstructions, p = " + std::to_string(basis.projected_dim()));
    tuned = finetune_on_reconstruction(base, basis, split.train, cfg.finetune, &tune_losses);
  }
  save_model(base, out / "model.bin");
  save_basis(basis, out / "basis.bin");
  save_model(tuned, out / "model_finetuned.bin");
  {
    std::ofstream loss(out / "losses.csv", std::ios::binary);
    loss << "stage,epoch,mean_loss\n";
    for (std::size_t e = 0; e < base_losses.size(); ++e) loss << "base," << e + 1 << ',' << format_double(base_losses[e]) << '\n';
    for (std::size_t e = 0; e < tune_losses.size(); ++e) {
      loss << "finetune," << e + 1 << ',' << format_double(tune_losses[e]) << '\n';
    }
  }
  nlohmann::ordered_json details;
  details["p"] = basis.projected_dim();
  details["test_accuracy"] = accuracy(base, split.test);
  details["test_accuracy_finetuned_projected"] = projected_accuracy(tuned, basis, split.test);
  write_manifest(out, "train", cfg, {"model.bin", "basis.bin", "model_finetuned.bin", "losses.csv"},
                 split.train.dim(), details.dump());
  return 0;
}

int cmd_certify(const RunConfig& cfg, const fs::path& out) {
  const DatasetSplit split = prepare_data(cfg);
  const Eigen::Index d = split.train.dim();
  const Models m = obtain_models(cfg, split.train);
  log("certifying " + std::to_string(std::min(cfg.certify_count, split.test.size())) + " inputs");
  const auto rows =
      run_certification(&m.finetuned, m.basis, &m.base, split.test, cfg.certify_count, cfg.smoothing, cfg.threads);
  write_certificates_csv(rows, out / "certificates.csv");
  write_certification_log(rows, cfg.smoothing, d, out / "certification_log.csv");
  save_basis(m.basis, out / "basis.bin");

  const auto pv = projected_volumes(rows);
  const auto av = ambient_volumes(rows, d);
  const auto pc = projected_correct(rows);
  const auto ac = ambient_correct(rows);
  const auto thresholds = curve_thresholds({pv, av}, kCurvePoints);
  const double unit = l2_ball_volume_log10(d, 1.0);
  write_curves(out / "curves.csv",
               {{"projected", certified_accuracy_curve(pv, pc, thresholds)},
                {"ambient", certified_accuracy_curve(av, ac, thresholds)}},
               unit);
  write_gnuplot_stub(out / "curves.gp", "curves.csv", "log10 certified volume", "certified accuracy", 2, 4, 1);

  const MethodSummary ps = summarize(pv, pc);
  const MethodSummary as = summarize(av, ac);
  std::cout << "projected: accuracy " << ps.accuracy << ", median log10 volume " << ps.median_log10_volume << '\n'
            << "ambient:   accuracy " << as.accuracy << ", median log10 volume " << as.median_log10_volume << '\n';
  nlohmann::ordered_json details;
  details["p"] = m.basis.projected_dim();
  details["projected"] = nlohmann::ordered_json::parse(summary_json(ps));
  details["ambient"] = nlohmann::ordered_json::parse(summary_json(as));
  write_manifest(out, "certify", cfg,
                 {"certificates.csv", "certification_log.csv", "basis.bin", "curves.csv", "curves.gp"}, d,
                 details.dump());
  return 0;
}

int cmd_attack_sweep(const RunConfig& cfg, const fs::path& out) {
  const DatasetSplit split = prepare_data(cfg);
  const MlpClassifier model = [&] {
    if (!cfg.model_path.empty()) return load_model(fs::path(cfg.model_path) / "model.bin");
    log("training unprotected model");
    return train_base_model(cfg, split.train, 0.0);
  }();
  const ProjectionBasis basis = build_basis(cfg, split.train, BasisKind::kPca, 0, cfg.attack_variance);
  log("attack subspace: p = " + std::to_string(basis.projected_dim()) + ", null space dimension " +
      std::to_string(basis.v().cols()));
  log("clean test accuracy " + std::to_string(accuracy(model, split.test)));
  const auto rows = attack_sweep(model, basis, split.test, cfg.attack_epsilons, cfg.sweep);
  write_sweep_csv(rows, out / "attack_sweep.csv");
  write_gnuplot_stub(out / "attack_sweep.gp", "attack_sweep.csv", "epsilon", "success rate", 2, 4, 1);
  for (const auto& r : rows) {
    std::cout << to_string(r.family) << " eps=" << r.epsilon << " success=" << r.success_rate << '\n';
  }
  nlohmann::ordered_json details;
  details["p"] = basis.projected_dim();
  details["clean_accuracy"] = accuracy(model, split.test);
  write_manifest(out, "attack-sweep", cfg, {"attack_sweep.csv", "attack_sweep.gp"}, split.train.dim(),
                 details.dump());
  return 0;
}

int cmd_volume_sweep(const RunConfig& cfg, const fs::path& out) {
  const DatasetSplit split = prepare_data(cfg);
  const Eigen::Index d = split.train.dim();
  log("training base model");
  const MlpClassifier base = train_base_model(cfg, split.train, cfg.train.noise_sigma);
  std::vector<std::pair<std::string, std::vector<double>>> vols;
  std::vector<std::vector<bool>> oks;
  std::vector<MethodSummary> sums;
  for (Eigen::Index p : cfg.sweep_p) {
    if (p >= d) throw ConfigError("sweep.p_values", "values must be smaller than the input dimension");
    const ProjectionBasis basis = build_basis(cfg, split.train, BasisKind::kPca, p, cfg.basis_variance);
    const MlpClassifier tuned = finetune_model(cfg, base, basis, split.train);
    log("certifying with p = " + std::to_string(p));
    const auto rows =
        run_certification(&tuned, basis, nullptr, split.test, cfg.certify_count, cfg.smoothing, cfg.threads);
    vols.emplace_back("p=" + std::to_string(p), projected_volumes(rows));
    oks.push_back(projected_correct(rows));
  }
  log("certifying ambient baseline");
  {
    const auto rows = run_certification(nullptr, identity_slice(d, d), &base, split.test, cfg.certify_count,
                                        cfg.smoothing, cfg.threads);
    vols.emplace_back("ambient", ambient_volumes(rows, d));
    oks.push_back(ambient_correct(rows));
  }
  std::vector<std::vector<double>> sets;
  for (const auto& v : vols) sets.push_back(v.second);
  const auto thresholds = curve_thresholds(sets, kCurvePoints);
  std::vector<std::pair<std::string, std::vector<CurvePoint>>> curves;
  std::ofstream summary(out / "volume_sweep_summary.csv", std::ios::binary);
  summary << "method,accuracy,median_log10_volume\n";
  for (std::size_t k = 0; k < vols.size(); ++k) {
    curves.emplace_back(vols[k].first, certified_accuracy_curve(vols[k].second, oks[k], thresholds));
    const MethodSummary s = summarize(vols[k].second, oks[k]);
    summary << vols[k].first << ',' << format_double(s.accuracy) << ',' << format_double(s.median_log10_volume) << '\n';
    std::cout << vols[k].first << ": accuracy " << s.accuracy << ", median log10 volume " << s.median_log10_volume
              << '\n';
  }
  write_curves(out / "volume_sweep.csv", curves, l2_ball_volume_log10(d, 1.0));
  write_gnuplot_stub(out / "volume_sweep.gp", "volume_sweep.csv", "log10 certified volume", "certified accuracy", 2,
                     4, 1);
  write_manifest(out, "volume-sweep", cfg, {"volume_sweep.csv", "volume_sweep_summary.csv", "volume_sweep.gp"}, d);
  return 0;
}

int cmd_ratio_sweep(const RunConfig& cfg, const fs::path& out) {
  const auto cells = ratio_grid(cfg.ratio_d, cfg.ratio_p, cfg.ratio_radius, cfg.ratio_t);
  write_ratio_csv(cells, out / "ratio_sweep.csv");
  write_gnuplot_stub(out / "ratio_sweep.gp", "ratio_sweep.csv", "d", "log10 volume ratio", 1, 5, 2);
  for (const auto& c : cells) std::cout << "d=" << c.d << " p=" << c.p << " log10_ratio=" << c.log10_ratio << '\n';
  write_manifest(out, "ratio-sweep", cfg, {"ratio_sweep.csv", "ratio_sweep.gp"}, 0);
  return 0;
}

int cmd_ablation(const RunConfig& cfg, const fs::path& out) {
  const DatasetSplit split = prepare_data(cfg);
  const Eigen::Index d = split.train.dim();
  log("training base model");
  const MlpClassifier base = train_base_model(cfg, split.train, cfg.train.noise_sigma);
  std::vector<std::pair<std::string, std::vector<double>>> vols;
  std::vector<std::vector<bool>> oks;
  const std::pair<BasisKind, Eigen::Index> variants[] = {{BasisKind::kPca, cfg.ablation_pca_p},
                                                         {BasisKind::kRandom, cfg.ablation_random_p}};
  for (const auto& [kind, p] : variants) {
    const ProjectionBasis basis = build_basis(cfg, split.train, kind, p, cfg.basis_variance);
    const MlpClassifier tuned = finetune_model(cfg, base, basis, split.train);
    log(std::string("certifying with ") + to_string(kind) + " basis, p = " + std::to_string(p));
    const bool with_ambient = kind == BasisKind::kPca;
    const auto rows = run_certification(&tuned, basis, with_ambient ? &base : nullptr, split.test, cfg.certify_count,
                                        cfg.smoothing, cfg.threads);
    vols.emplace_back(std::string(to_string(kind)) + " p=" + std::to_string(p), projected_volumes(rows));
    oks.push_back(projected_correct(rows));
    if (with_ambient) {
      vols.emplace_back("ambient", ambient_volumes(rows, d));
      oks.push_back(ambient_correct(rows));
    }
  }
  std::vector<std::vector<double>> sets;
  for (const auto& v : vols) sets.push_back(v.second);
  const auto thresholds = curve_thresholds(sets, kCurvePoints);
  std::vector<std::pair<std::string, std::vector<CurvePoint>>> curves;
  nlohmann::ordered_json details;
  for (std::size_t k = 0; k < vols.size(); ++k) {
    curves.emplace_back(vols[k].first, certified_accuracy_curve(vols[k].second, oks[k], thresholds));
    const MethodSummary s = summarize(vols[k].second, oks[k]);
    details[vols[k].first] = nlohmann::ordered_json::parse(summary_json(s));
    std::cout << vols[k].first << ": accuracy " << s.accuracy << ", median log10 volume " << s.median_log10_volume
              << '\n';
  }
  write_curves(out / "ablation.csv", curves, l2_ball_volume_log10(d, 1.0));
  write_gnuplot_stub(out / "ablation.gp", "ablation.csv", "log10 certified volume", "certified accuracy", 2, 4, 1);
  write_manifest(out, "ablation", cfg, {"ablation.csv", "ablation.gp"}, d, details.dump());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projected randomized smoothing: certification and attack experiments"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
  };
  Args args;
  using Handler = int (*)(const RunConfig&, const fs::path&);
  const std::pair<const char*, std::pair<const char*, Handler>> commands[] = {
      {"gen-data", {"Generate or ingest the dataset and write CSV files", cmd_gen_data}},
      {"train", {"Train the base model, fit the basis, finetune on reconstructions", cmd_train}},
      {"certify", {"Certify test inputs with projected and standard smoothing", cmd_certify}},
      {"attack-sweep", {"Attack success rates over epsilon for every attack family", cmd_attack_sweep}},
      {"volume-sweep", {"Certified accuracy against volume for several projected dimensions", cmd_volume_sweep}},
      {"ratio-sweep", {"Log volume ratio of the projected bound to the l2 ball over (d, p)", cmd_ratio_sweep}},
      {"ablation", {"PCA basis against a random orthonormal basis", cmd_ablation}},
  };
  Handler selected = nullptr;
  std::string selected_name;
  for (const auto& [name, info] : commands) {
    CLI::App* sub = app.add_subcommand(name, info.first);
    sub->add_option("--config", args.config, "Configuration file (key = value lines)")->required();
    sub->add_option("--out", args.out, "Output directory")->required();
    sub->add_option("--seed", args.seed, "Global seed; overrides the config");
    const Handler h = info.second;
    const std::string n = name;
    sub->callback([&selected, &selected_name, h, n] {
      selected = h;
      selected_name = n;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    RunConfig cfg = load_config(args.config);
    if (args.seed) {
      cfg.apply_seed(*args.seed);
      cfg.entries["seed"] = std::to_string(*args.seed);
    }
    const fs::path out = args.out;
    fs::create_directories(out);
    return selected(cfg, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
