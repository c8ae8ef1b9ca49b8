#include "doctest.h"

#include "prs/classifier.hpp"
#include "prs/data.hpp"
#include "prs/projection.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>

using namespace prs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "prs_unit_tests";
  fs::create_directories(dir);
  return dir / name;
}

double max_principal_angle_deg(const Matrix& a, const Matrix& b) {
  Eigen::JacobiSVD<Matrix> svd(a.transpose() * b);
  return std::acos(std::min(1.0, svd.singularValues().minCoeff())) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("noise-free generator output has the intrinsic rank") {
  LowRankParams prm;
  prm.dim = 8;
  prm.intrinsic_dim = 2;
  prm.num_samples = 500;
  prm.seed = 4;
  const Dataset ds = gen_lowrank(prm);
  const Vector ev = pca_spectrum(ds.inputs).eigenvalues;
  CHECK(ev(1) > 0.0);
  CHECK(ev.tail(6).cwiseAbs().maxCoeff() < 1e-10 * ev(0));
  CHECK(ds.inputs.cwiseAbs().maxCoeff() <= 0.5);
}

TEST_CASE("generator: determinism, containment, subspace recovery under small noise") {
  LowRankParams prm;
  prm.dim = 32;
  prm.intrinsic_dim = 4;
  prm.num_samples = 2000;
  prm.seed = 12;
  const Dataset clean = gen_lowrank(prm);
  CHECK(clean.inputs == gen_lowrank(prm).inputs);
  CHECK(clean.labels == gen_lowrank(prm).labels);
  for (double noise : {0.001, 0.01}) {
    prm.noise_std = noise;
    const Dataset noisy = gen_lowrank(prm);
    CHECK(noisy.inputs.cwiseAbs().maxCoeff() <= 0.5);
    const Matrix truth = fit_pca(clean.inputs, 4).u();
    CHECK(max_principal_angle_deg(fit_pca(noisy.inputs, 4).u(), truth) < 5.0);
  }
  prm.intrinsic_dim = 32;
  CHECK_THROWS(gen_lowrank(prm));
}

TEST_CASE("well separated classes are linearly separable") {
  LowRankParams prm;
  prm.dim = 16;
  prm.intrinsic_dim = 3;
  prm.num_classes = 2;
  prm.separation = 12.0;
  prm.seed = 5;
  const DatasetSplit split = gen_lowrank_split(prm, 800, 400);
  const MlpClassifier linear =
      train(MlpClassifier::initialize({16, 2}, Activation::kTanh, 1), split.train, TrainConfig{30, 32, 0.1, 0.9, 0.0, 1.0, 0.0, 1});
  CHECK(accuracy(linear, split.test) >= 0.99);
}

TEST_CASE("CSV round trip and metadata sidecar") {
  LowRankParams prm;
  prm.dim = 6;
  prm.intrinsic_dim = 2;
  prm.num_samples = 50;
  prm.noise_std = 0.01;
  const Dataset ds = gen_lowrank(prm);
  const fs::path path = scratch("roundtrip.csv");
  save_csv(ds, path);
  const Dataset back = load_csv(path);
  CHECK(back.inputs == ds.inputs);
  CHECK(back.labels == ds.labels);
  save_metadata(ds, prm, scratch("roundtrip.meta.json"));
  std::ifstream meta(scratch("roundtrip.meta.json"));
  const auto j = nlohmann::json::parse(meta);
  CHECK(j.at("d").get<int>() == 6);
  CHECK(j.at("n").get<int>() == 50);
}

TEST_CASE("malformed rows are reported by row number") {
  const fs::path path = scratch("bad.csv");
  {
    std::ofstream out(path);
    out << "0,0.1,0.2,0.3,0.4,0.0\n1,0.1,0.2,0.3,0.4,0.0\n0,0.1,0.2\n";
  }
  try {
    load_csv(path);
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << "0,0.1,abc\n";
  }
  CHECK_THROWS_AS(load_csv(path), FormatError);
}

TEST_CASE("out-of-cube values need rescaling, which is affine and order preserving") {
  const fs::path path = scratch("pixels.csv");
  {
    std::ofstream out(path);
    out << "label,f1,f2,f3\n0,0,128,255\n1,64,32,200\n";
  }
  CHECK_THROWS_AS(load_csv(path), FormatError);
  const Dataset ds = load_csv(path, true);
  CHECK(ds.inputs.cwiseAbs().maxCoeff() <= 0.5);
  const double raw[6] = {0, 128, 255, 64, 32, 200};
  for (int a = 0; a < 6; ++a) {
    for (int b = 0; b < 6; ++b) {
      const double xa = ds.inputs(a / 3, a % 3), xb = ds.inputs(b / 3, b % 3);
      CHECK((raw[a] < raw[b]) == (xa < xb));
      CHECK(xa == doctest::Approx(raw[a] / 255.0 - 0.5).epsilon(1e-12));
    }
  }
}
