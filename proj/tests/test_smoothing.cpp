#include "doctest.h"
#include "oracles.hpp"

#include "prs/classifier.hpp"
#include "prs/data.hpp"
#include "prs/projection.hpp"
#include "prs/smoothing.hpp"
#include "prs/special.hpp"

using namespace prs;

namespace {

FunctionClassifier constant_classifier(int dim, int cls) {
  return FunctionClassifier(dim, 3, [cls](const Vector&) { return cls; });
}

// At x = 0 the sign of the first noise coordinate is a fair coin.
FunctionClassifier coin_classifier(int dim) {
  return FunctionClassifier(dim, 2, [](const Vector& z) { return z(0) > 0.0 ? 0 : 1; });
}

}  // namespace

TEST_CASE("constant classifier: prediction and radius") {
  const auto f = constant_classifier(3, 1);
  SmoothingParams prm{1.0, 100, 100, 0.001, 5, 64};
  for (std::uint64_t id = 0; id < 20; ++id) {
    const SmoothOutcome p = smooth_predict(f, Vector::Zero(3), prm, id);
    CHECK(!p.abstain);
    CHECK(p.predicted == 1);
  }
  const SmoothOutcome c = smooth_certify(f, Vector::Zero(3), prm);
  REQUIRE(!c.abstain);
  CHECK(c.predicted == 1);
  const double want = oracle::normal_quantile(std::pow(0.001, 1.0 / 100));
  CHECK(std::abs(c.radius - want) < 1e-6);
  CHECK(std::abs(c.radius - 1.5006) < 1e-3);
}

TEST_CASE("a fair-coin black box abstains") {
  const auto f = coin_classifier(2);
  int predict_abstain = 0;
  int certify_abstain = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    SmoothingParams prm{0.5, 100, 1000, 0.001, trial, 500};
    predict_abstain += smooth_predict(f, Vector::Zero(2), prm).abstain;
    certify_abstain += smooth_certify(f, Vector::Zero(2), prm).abstain;
  }
  CHECK(predict_abstain >= 90);
  CHECK(certify_abstain >= 99);
}

TEST_CASE("determinism and independence from batch size") {
  const auto f = FunctionClassifier(2, 3, [](const Vector& z) { return z(0) > 0.3 ? 0 : (z(1) > 0 ? 1 : 2); });
  SmoothingParams a{0.4, 100, 3000, 0.01, 77, 3000};
  SmoothingParams b = a;
  b.batch_size = 17;
  const Vector x = Vector::Constant(2, 0.8);
  const SmoothOutcome r1 = smooth_certify(f, x, a, 4);
  const SmoothOutcome r2 = smooth_certify(f, x, a, 4);
  const SmoothOutcome r3 = smooth_certify(f, x, b, 4);
  CHECK(r1.radius == r2.radius);
  CHECK(r1.radius == r3.radius);
  CHECK(r1.top_count == r3.top_count);
}

TEST_CASE("radius scales with sigma on a scale-invariant black box") {
  // f(x + sigma e) at x = 0 depends only on the direction of e.
  const auto f = FunctionClassifier(3, 2, [](const Vector& z) { return z(0) > -0.4 * z.norm() ? 0 : 1; });
  SmoothingParams prm{0.5, 100, 2000, 0.001, 3, 1000};
  const SmoothOutcome base = smooth_certify(f, Vector::Zero(3), prm);
  REQUIRE(!base.abstain);
  for (double c : {0.1, 2.0, 7.5}) {
    SmoothingParams scaled = prm;
    scaled.sigma = prm.sigma * c;
    const SmoothOutcome r = smooth_certify(f, Vector::Zero(3), scaled);
    CHECK(r.top_count == base.top_count);
    CHECK(r.radius == doctest::Approx(c * base.radius).epsilon(1e-14));
  }
}

TEST_CASE("projected certification with the full identity slice equals ambient certification") {
  const MlpClassifier m = MlpClassifier::initialize({4, 8, 3}, Activation::kTanh, 9);
  const ProjectionBasis full = identity_slice(4, 4);
  SmoothingParams prm{0.3, 50, 500, 0.01, 12, 128};
  for (std::uint64_t id = 0; id < 5; ++id) {
    const Vector x = Vector::Constant(4, 0.1 * static_cast<double>(id) - 0.2);
    const SmoothOutcome a = ambient_certify(m, x, prm, id);
    const SmoothOutcome p = project_certify(m, full, x, prm, id);
    CHECK(a.abstain == p.abstain);
    CHECK(a.predicted == p.predicted);
    CHECK(a.radius == p.radius);
  }
  const auto f = constant_classifier(2, 2);
  const SmoothOutcome amb = smooth_certify(f, Vector::Zero(2), SmoothingParams{1.0, 100, 100, 0.001, 0, 100});
  const MlpClassifier constant = [] {
    MlpClassifier z = MlpClassifier::zeros({2, 3});
    z.bias(0) << 0.0, 0.0, 1.0;
    return z;
  }();
  const SmoothOutcome proj =
      project_certify(constant, identity_slice(2, 1), Vector::Zero(2), SmoothingParams{1.0, 100, 100, 0.001, 0, 100});
  CHECK(proj.predicted == 2);
  CHECK(proj.radius == amb.radius);
}

TEST_CASE("trained toy model certifies most test points at sigma 0.15") {
  LowRankParams prm;
  prm.dim = 16;
  prm.intrinsic_dim = 3;
  prm.num_classes = 3;
  prm.separation = 4.0;
  prm.seed = 21;
  const DatasetSplit split = gen_lowrank_split(prm, 1500, 50);
  const MlpClassifier m = train(MlpClassifier::initialize({16, 32, 3}, Activation::kTanh, 2), split.train,
                                TrainConfig{20, 32, 0.02, 0.9, 0.0005, 0.95, 0.15, 4});
  SmoothingParams sp{0.15, 100, 10000, 0.001, 8, 2500};
  int certified = 0;
  for (Eigen::Index i = 0; i < 50; ++i) {
    const SmoothOutcome r = ambient_certify(m, split.test.input(i), sp, static_cast<std::uint64_t>(i));
    if (!r.abstain) {
      ++certified;
      CHECK(r.pa_lower > 0.5);
      CHECK(r.radius >= 0.0);
      CHECK(std::isfinite(r.radius));
    }
  }
  CHECK(certified >= 40);
}
