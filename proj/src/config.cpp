#include "prs/config.hpp"

#include "prs/rng.hpp"
#include "prs/serialize.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

namespace prs {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& key, const std::string& text) {
  auto parse_plain = [&](std::string_view s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError(key, "'" + text + "' is not a number");
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_plain(text);
  const double den = parse_plain(trim(std::string_view(text).substr(slash + 1)));
  if (den == 0.0) throw ConfigError(key, "division by zero in '" + text + "'");
  return parse_plain(trim(std::string_view(text).substr(0, slash))) / den;
}

long long parse_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw ConfigError(key, "'" + text + "' is not an integer");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key, "'" + text + "' is not a boolean");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

Setter num(double RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number(k, v); };
}

template <typename Get>
Setter num_at(Get get) {
  return [get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_number(k, v); };
}

template <typename Get>
Setter int_at(Get get) {
  return [get](RunConfig& c, const std::string& k, const std::string& v) {
    get(c) = static_cast<std::remove_reference_t<decltype(get(c))>>(parse_integer(k, v));
  };
}

template <typename Get>
Setter bool_at(Get get) {
  return [get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_bool(k, v); };
}

template <typename Get>
Setter index_list_at(Get get) {
  return [get](RunConfig& c, const std::string& k, const std::string& v) {
    auto& out = get(c);
    out.clear();
    for (const auto& item : split_list(v)) out.push_back(static_cast<std::remove_reference_t<decltype(out[0])>>(parse_integer(k, item)));
  };
}

void add_train_keys(std::map<std::string, Setter>& t, const std::string& prefix, TrainConfig RunConfig::*field) {
  t[prefix + ".epochs"] = int_at([field](RunConfig& c) -> int& { return (c.*field).epochs; });
  t[prefix + ".batch_size"] = int_at([field](RunConfig& c) -> int& { return (c.*field).batch_size; });
  t[prefix + ".learning_rate"] = num_at([field](RunConfig& c) -> double& { return (c.*field).learning_rate; });
  t[prefix + ".momentum"] = num_at([field](RunConfig& c) -> double& { return (c.*field).momentum; });
  t[prefix + ".weight_decay"] = num_at([field](RunConfig& c) -> double& { return (c.*field).weight_decay; });
  t[prefix + ".lr_decay"] = num_at([field](RunConfig& c) -> double& { return (c.*field).lr_decay_per_epoch; });
  t[prefix + ".noise_sigma"] = num_at([field](RunConfig& c) -> double& { return (c.*field).noise_sigma; });
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["data.train"] = [](RunConfig& c, const std::string&, const std::string& v) { c.train_path = v; };
    t["data.test"] = [](RunConfig& c, const std::string&, const std::string& v) { c.test_path = v; };
    t["data.rescale"] = bool_at([](RunConfig& c) -> bool& { return c.rescale; });
    t["data.d"] = int_at([](RunConfig& c) -> Eigen::Index& { return c.data.dim; });
    t["data.k"] = int_at([](RunConfig& c) -> Eigen::Index& { return c.data.intrinsic_dim; });
    t["data.classes"] = int_at([](RunConfig& c) -> int& { return c.data.num_classes; });
    t["data.n_train"] = int_at([](RunConfig& c) -> Eigen::Index& { return c.n_train; });
    t["data.n_test"] = int_at([](RunConfig& c) -> Eigen::Index& { return c.n_test; });
    t["data.noise_std"] = num_at([](RunConfig& c) -> double& { return c.data.noise_std; });
    t["data.separation"] = num_at([](RunConfig& c) -> double& { return c.data.separation; });
    t["basis.kind"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      try {
        c.basis_kind = basis_kind_from_string(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(k, e.what());
      }
    };
    t["basis.p"] = int_at([](RunConfig& c) -> Eigen::Index& { return c.p; });
    t["basis.variance"] = num(&RunConfig::basis_variance);
    t["basis.subset_fraction"] = num(&RunConfig::pca_subset_fraction);
    t["model.hidden"] = index_list_at([](RunConfig& c) -> std::vector<int>& { return c.hidden; });
    t["model.activation"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      try {
        c.activation = activation_from_string(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(k, e.what());
      }
    };
    t["model.path"] = [](RunConfig& c, const std::string&, const std::string& v) { c.model_path = v; };
    add_train_keys(t, "train", &RunConfig::train);
    add_train_keys(t, "finetune", &RunConfig::finetune);
    t["finetune.enabled"] = bool_at([](RunConfig& c) -> bool& { return c.finetune_enabled; });
    t["smooth.sigma"] = num_at([](RunConfig& c) -> double& { return c.smoothing.sigma; });
    t["smooth.n0"] = int_at([](RunConfig& c) -> std::int64_t& { return c.smoothing.n0; });
    t["smooth.n"] = int_at([](RunConfig& c) -> std::int64_t& { return c.smoothing.n; });
    t["smooth.alpha"] = num_at([](RunConfig& c) -> double& { return c.smoothing.alpha; });
    t["smooth.batch"] = int_at([](RunConfig& c) -> std::int64_t& { return c.smoothing.batch_size; });
    t["certify.count"] = int_at([](RunConfig& c) -> Eigen::Index& { return c.certify_count; });
    t["attack.epsilons"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.attack_epsilons.clear();
      for (const auto& item : split_list(v)) c.attack_epsilons.push_back(parse_number(k, item));
    };
    t["attack.families"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.sweep.families.clear();
      for (const auto& item : split_list(v)) {
        try {
          c.sweep.families.push_back(attack_family_from_string(item));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(k, e.what());
        }
      }
    };
    t["attack.variance"] = num(&RunConfig::attack_variance);
    t["attack.count"] = int_at([](RunConfig& c) -> Eigen::Index& { return c.sweep.max_inputs; });
    t["attack.pgd_steps"] = int_at([](RunConfig& c) -> int& { return c.sweep.pgd_steps; });
    t["attack.pgd_step_size"] = num_at([](RunConfig& c) -> double& { return c.sweep.pgd_step_size; });
    t["attack.subspace_steps"] = int_at([](RunConfig& c) -> int& { return c.sweep.subspace_steps; });
    t["attack.subspace_step_fraction"] =
        num_at([](RunConfig& c) -> double& { return c.sweep.subspace_step_fraction; });
    t["sweep.p_values"] = index_list_at([](RunConfig& c) -> std::vector<Eigen::Index>& { return c.sweep_p; });
    t["ratio.d_values"] = index_list_at([](RunConfig& c) -> std::vector<Eigen::Index>& { return c.ratio_d; });
    t["ratio.p_values"] = index_list_at([](RunConfig& c) -> std::vector<Eigen::Index>& { return c.ratio_p; });
    t["ratio.radius"] = num(&RunConfig::ratio_radius);
    t["ratio.t"] = num(&RunConfig::ratio_t);
    t["ablation.pca_p"] = int_at([](RunConfig& c) -> Eigen::Index& { return c.ablation_pca_p; });
    t["ablation.random_p"] = int_at([](RunConfig& c) -> Eigen::Index& { return c.ablation_random_p; });
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      const long long s = parse_integer(k, v);
      if (s < 0) throw ConfigError(k, "seed must be nonnegative");
      c.apply_seed(static_cast<std::uint64_t>(s));
    };
    t["threads"] = int_at([](RunConfig& c) -> int& { return c.threads; });
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void RunConfig::apply_seed(std::uint64_t global_seed) {
  seed = global_seed;
  data.seed = global_seed;
  train.seed = hash_key(global_seed, 2);
  finetune.seed = hash_key(global_seed, 3);
  smoothing.seed = hash_key(global_seed, 4);
  sweep.seed = hash_key(global_seed, 5);
}

RunConfig default_config() {
  RunConfig c;
  c.data.dim = 64;
  c.data.intrinsic_dim = 8;
  c.data.num_classes = 4;
  c.data.noise_std = 0.0;
  c.data.separation = 1.5;
  c.train = TrainConfig{30, 64, 0.01, 0.9, 0.0005, 0.95, 0.25, 0};
  c.finetune = TrainConfig{20, 64, 0.005, 0.9, 0.0005, 0.95, 0.25, 0};
  c.smoothing = SmoothingParams{0.25, 100, 10000, 0.001, 0, 2000};
  c.attack_epsilons = {2.0 / 255, 4.0 / 255, 8.0 / 255, 16.0 / 255, 32.0 / 255};
  c.sweep_p = {2, 4, 8, 16, 32};
  c.ratio_d = {64, 128, 256, 512, 1024, 2048, 3072};
  c.ratio_p = {8, 16, 32, 64};
  c.apply_seed(0);
  return c;
}

std::string RunConfig::canonical_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries) {
    if (k != "seed") out << k << " = " << v << '\n';
  }
  out << "seed = " << seed << '\n';
  return out.str();
}

void RunConfig::validate() const {
  if (train_path.empty() != test_path.empty()) {
    throw ConfigError(train_path.empty() ? "data.train" : "data.test", "data.train and data.test must be set together");
  }
  if (data.dim < 2) throw ConfigError("data.d", "must be at least 2");
  if (data.intrinsic_dim < 1 || data.intrinsic_dim >= data.dim) throw ConfigError("data.k", "must satisfy 1 <= k < d");
  if (data.num_classes < 2) throw ConfigError("data.classes", "must be at least 2");
  if (n_train < 2) throw ConfigError("data.n_train", "must be at least 2");
  if (n_test < 1) throw ConfigError("data.n_test", "must be at least 1");
  if (data.noise_std < 0) throw ConfigError("data.noise_std", "must be nonnegative");
  if (p < 0) throw ConfigError("basis.p", "must be nonnegative (0 selects by variance)");
  if (!(basis_variance > 0 && basis_variance <= 1)) throw ConfigError("basis.variance", "must lie in (0, 1]");
  if (!(pca_subset_fraction > 0 && pca_subset_fraction <= 1)) {
    throw ConfigError("basis.subset_fraction", "must lie in (0, 1]");
  }
  if (hidden.empty()) throw ConfigError("model.hidden", "needs at least one hidden width");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("model.hidden", "widths must be positive");
  }
  auto check_train = [](const TrainConfig& t, const std::string& prefix) {
    try {
      t.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(prefix, e.what());
    }
  };
  check_train(train, "train");
  check_train(finetune, "finetune");
  try {
    smoothing.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("smooth", e.what());
  }
  if (certify_count < 1) throw ConfigError("certify.count", "must be positive");
  if (attack_epsilons.empty()) throw ConfigError("attack.epsilons", "needs at least one value");
  for (double e : attack_epsilons) {
    if (!(e > 0 && e <= 1)) throw ConfigError("attack.epsilons", "values must lie in (0, 1]");
  }
  if (!(attack_variance > 0 && attack_variance <= 1)) throw ConfigError("attack.variance", "must lie in (0, 1]");
  if (sweep.max_inputs < 1) throw ConfigError("attack.count", "must be positive");
  if (sweep.pgd_steps < 1) throw ConfigError("attack.pgd_steps", "must be positive");
  if (!(sweep.pgd_step_size > 0)) throw ConfigError("attack.pgd_step_size", "must be positive");
  if (sweep.subspace_steps < 1) throw ConfigError("attack.subspace_steps", "must be positive");
  if (!(sweep.subspace_step_fraction > 0)) throw ConfigError("attack.subspace_step_fraction", "must be positive");
  for (auto v : sweep_p) {
    if (v < 1) throw ConfigError("sweep.p_values", "values must be positive");
  }
  for (auto v : ratio_d) {
    if (v < 1) throw ConfigError("ratio.d_values", "values must be positive");
  }
  for (auto v : ratio_p) {
    if (v < 1) throw ConfigError("ratio.p_values", "values must be positive");
  }
  if (!(ratio_t >= 0 && ratio_t < 0.5)) throw ConfigError("ratio.t", "must lie in [0, 1/2)");
  if (!(ratio_radius >= 0)) throw ConfigError("ratio.radius", "must be nonnegative");
  if (ablation_pca_p < 1) throw ConfigError("ablation.pca_p", "must be positive");
  if (ablation_random_p < 1) throw ConfigError("ablation.random_p", "must be positive");
  if (threads < 1) throw ConfigError("threads", "must be at least 1");
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg = default_config();
  const auto& table = setters();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(text, "line " + std::to_string(line_no) + " is not of the form key = value");
    }
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key, "unknown key");
    if (value.empty()) throw ConfigError(key, "missing value");
    it->second(cfg, key, value);
    cfg.entries[key] = value;
  }
  // The global seed also drives the derived seeds; apply it after every other key.
  cfg.apply_seed(cfg.seed);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  return parse_config(in);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace prs
