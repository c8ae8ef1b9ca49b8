#include "doctest.h"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const char* kSmallConfig =
    "data.d = 16\n"
    "data.k = 3\n"
    "data.n_train = 300\n"
    "data.n_test = 30\n"
    "basis.p = 3\n"
    "model.hidden = 16\n"
    "train.epochs = 3\n"
    "finetune.epochs = 2\n"
    "smooth.n0 = 20\n"
    "smooth.n = 300\n"
    "smooth.alpha = 0.01\n"
    "certify.count = 6\n"
    "attack.count = 6\n"
    "attack.epsilons = 4/255, 16/255\n"
    "sweep.p_values = 2, 4\n"
    "ratio.d_values = 16, 32\n"
    "ratio.p_values = 2, 4\n"
    "ablation.pca_p = 3\n"
    "ablation.random_p = 4\n"
    "seed = 5\n";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("prs_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

int run(const std::string& args) {
  const std::string cmd = std::string(PRS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

nlohmann::json manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("configuration errors exit with status 2") {
  const fs::path dir = scratch("errors");
  const fs::path bad = write_file(dir / "bad.cfg", "smooth.sigmaa = 0.2\n");
  CHECK(run("certify --config " + bad.string() + " --out " + (dir / "o").string()) == 2);
  const fs::path bad_value = write_file(dir / "bad_value.cfg", "smooth.n = lots\n");
  CHECK(run("gen-data --config " + bad_value.string() + " --out " + (dir / "o").string()) == 2);
  CHECK(run("gen-data --config " + (dir / "missing.cfg").string() + " --out " + (dir / "o").string()) == 2);
  CHECK(run("gen-data --out " + (dir / "o").string()) == 2);
  CHECK(run("no-such-command") == 2);
  const fs::path too_big = write_file(dir / "p.cfg", std::string(kSmallConfig) + "basis.p = 16\n");
  CHECK(run("train --config " + too_big.string() + " --out " + (dir / "o").string()) == 2);
}

TEST_CASE("gen-data writes datasets, sidecars and a manifest; --seed overrides the config") {
  const fs::path dir = scratch("gen");
  const fs::path cfg = write_file(dir / "run.cfg", kSmallConfig);
  REQUIRE(run("gen-data --config " + cfg.string() + " --out " + (dir / "a").string()) == 0);
  for (const char* f : {"train.csv", "test.csv", "train.meta.json", "test.meta.json", "manifest.json"})
    CHECK(fs::exists(dir / "a" / f));
  const nlohmann::json m = manifest(dir / "a");
  CHECK(m["command"] == "gen-data");
  CHECK(m["seed"] == 5);
  CHECK(m.contains("config_hash"));
  REQUIRE(run("gen-data --config " + cfg.string() + " --out " + (dir / "b").string() + " --seed 9") == 0);
  CHECK(manifest(dir / "b")["seed"] == 9);
  REQUIRE(run("gen-data --config " + cfg.string() + " --out " + (dir / "c").string()) == 0);
  std::ifstream a(dir / "a" / "train.csv"), b(dir / "b" / "train.csv"), c(dir / "c" / "train.csv");
  std::stringstream sa, sb, sc;
  sa << a.rdbuf();
  sb << b.rdbuf();
  sc << c.rdbuf();
  CHECK(sa.str() == sc.str());
  CHECK(sa.str() != sb.str());
}

TEST_CASE("train, certify and the sweeps run end to end on a small problem") {
  const fs::path dir = scratch("pipeline");
  const fs::path cfg = write_file(dir / "run.cfg", kSmallConfig);
  const std::string c = " --config " + cfg.string() + " --out ";

  REQUIRE(run("train" + c + (dir / "train").string()) == 0);
  for (const char* f : {"model.bin", "basis.bin", "model_finetuned.bin", "losses.csv"})
    CHECK(fs::exists(dir / "train" / f));

  REQUIRE(run("certify" + c + (dir / "certify").string()) == 0);
  CHECK(first_line(dir / "certify" / "certificates.csv") ==
        "input_id,label,predicted,abstain,R_raw,R_clamped,t,lp_gap,r_star,log10_volume,log10_l2_ball_volume,"
        "log10_ratio");
  CHECK(first_line(dir / "certify" / "certification_log.csv") ==
        "input_id,label,method,predicted,abstain,pA_lower,R,log10_volume,sigma,n0,n,alpha,seed");
  CHECK(fs::exists(dir / "certify" / "curves.csv"));
  CHECK(manifest(dir / "certify")["input_dim"] == 16);

  // Loading the trained models gives the same certificates as retraining with the same seed.
  const fs::path cfg2 =
      write_file(dir / "load.cfg", std::string(kSmallConfig) + "model.path = " + (dir / "train").string() + "\n");
  REQUIRE(run("certify --config " + cfg2.string() + " --out " + (dir / "certify2").string()) == 0);
  std::ifstream x(dir / "certify" / "certificates.csv"), y(dir / "certify2" / "certificates.csv");
  std::stringstream sx, sy;
  sx << x.rdbuf();
  sy << y.rdbuf();
  CHECK(sx.str() == sy.str());

  REQUIRE(run("attack-sweep" + c + (dir / "attack").string()) == 0);
  CHECK(first_line(dir / "attack" / "attack_sweep.csv").rfind("family,epsilon", 0) == 0);
  REQUIRE(run("volume-sweep" + c + (dir / "volume").string()) == 0);
  CHECK(fs::exists(dir / "volume" / "volume_sweep.csv"));
  REQUIRE(run("ratio-sweep" + c + (dir / "ratio").string()) == 0);
  CHECK(fs::exists(dir / "ratio" / "ratio_sweep.csv"));
  REQUIRE(run("ablation" + c + (dir / "ablation").string()) == 0);
  CHECK(fs::exists(dir / "ablation" / "ablation.csv"));
  for (const char* sub : {"train", "certify", "attack", "volume", "ratio", "ablation"})
    CHECK(fs::exists(dir / sub / "manifest.json"));
}
