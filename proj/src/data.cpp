#include "prs/data.hpp"

#include "prs/rng.hpp"
#include "prs/serialize.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace prs {

void Dataset::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
    throw DimensionError("Dataset: label count differs from input count");
  }
  if (num_classes < 1) throw std::invalid_argument("Dataset: num_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw std::out_of_range("Dataset: label " + std::to_string(labels[i]) + " of row " + std::to_string(i) +
                              " is outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  if (inputs.size() > 0 && inputs.cwiseAbs().maxCoeff() > 0.5) {
    throw std::out_of_range("Dataset: inputs must lie in [-1/2, 1/2]^d");
  }
}

Dataset Dataset::subset(Eigen::Index begin, Eigen::Index count) const {
  if (begin < 0 || count < 0 || begin + count > size()) throw std::out_of_range("Dataset::subset out of range");
  Dataset out;
  out.inputs = inputs.middleRows(begin, count);
  out.labels.assign(labels.begin() + begin, labels.begin() + begin + count);
  out.num_classes = num_classes;
  out.provenance = provenance;
  return out;
}

Dataset gen_lowrank(const LowRankParams& prm) {
  if (prm.dim < 2 || prm.intrinsic_dim < 1 || prm.intrinsic_dim >= prm.dim) {
    throw std::invalid_argument("gen_lowrank: need 1 <= k < d");
  }
  if (prm.num_classes < 2 || prm.num_samples < 1) throw std::invalid_argument("gen_lowrank: need c >= 2 and n >= 1");
  if (prm.noise_std < 0.0 || prm.separation < 0.0) throw std::invalid_argument("gen_lowrank: negative scale");
  const Eigen::Index d = prm.dim;
  const Eigen::Index k = prm.intrinsic_dim;

  CounterRng structure(prm.seed, 0xda7aULL, 0);
  Matrix g(d, k);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = structure.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix plane = qr.householderQ() * Matrix::Identity(d, k);
  Matrix means(k, prm.num_classes);
  for (Eigen::Index i = 0; i < means.size(); ++i) means.data()[i] = structure.normal();
  means *= prm.separation / std::sqrt(2.0);

  Dataset out;
  out.num_classes = prm.num_classes;
  out.labels.resize(static_cast<std::size_t>(prm.num_samples));
  Matrix latent(prm.num_samples, k);
  for (Eigen::Index i = 0; i < prm.num_samples; ++i) {
    CounterRng rng(prm.seed, 0xda7aULL, 1 + static_cast<std::uint64_t>(i));
    const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(prm.num_classes)));
    out.labels[static_cast<std::size_t>(i)] = y;
    for (Eigen::Index j = 0; j < k; ++j) latent(i, j) = means(j, y) + rng.normal();
  }
  Matrix x = latent * plane.transpose();

  // Global affine map into the cube, leaving room for the noise.
  const double lo = x.minCoeff();
  const double hi = x.maxCoeff();
  const double margin = std::min(0.25, 4.0 * prm.noise_std);
  const double scale = hi > lo ? (1.0 - 2.0 * margin) / (hi - lo) : 1.0;
  x = ((x.array() - 0.5 * (lo + hi)) * scale).matrix();
  if (prm.noise_std > 0.0) {
    for (Eigen::Index i = 0; i < prm.num_samples; ++i) {
      CounterRng rng(prm.seed, 0x0153ULL, static_cast<std::uint64_t>(i));
      for (Eigen::Index j = 0; j < d; ++j) x(i, j) += prm.noise_std * rng.normal();
    }
    const double peak = x.cwiseAbs().maxCoeff();
    if (peak > 0.5) x *= 0.5 / peak;
  }
  out.inputs = std::move(x);
  std::ostringstream tag;
  tag << "lowrank(d=" << d << ",k=" << k << ",c=" << prm.num_classes << ",n=" << prm.num_samples
      << ",noise=" << prm.noise_std << ",sep=" << prm.separation << ",seed=" << prm.seed << ")";
  out.provenance = tag.str();
  out.validate();
  return out;
}

DatasetSplit gen_lowrank_split(const LowRankParams& params, Eigen::Index num_train, Eigen::Index num_test) {
  LowRankParams all = params;
  all.num_samples = num_train + num_test;
  Dataset full = gen_lowrank(all);
  DatasetSplit split{full.subset(0, num_train), full.subset(num_train, num_test)};
  split.train.provenance += "[train]";
  split.test.provenance += "[test]";
  return split;
}

namespace {


std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, bool rescale) {
  std::ifstream in(path);
  if (!in) throw FormatError("load_csv: cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    if (rows.empty() && labels.empty() && view.substr(0, 5) == "label") continue;
    const auto fields = split_commas(view);
    if (fields.size() < 2) throw FormatError("load_csv: row " + std::to_string(line_no) + " has no features");
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw FormatError("load_csv: row " + std::to_string(line_no) + " has " + std::to_string(fields.size() - 1) +
                        " features, expected " + std::to_string(width - 1));
    }
    const auto lab = trim(fields[0]);
    int y = 0;
    auto lr = std::from_chars(lab.data(), lab.data() + lab.size(), y);
    if (lr.ec != std::errc() || lr.ptr != lab.data() + lab.size() || y < 0) {
      throw FormatError("load_csv: row " + std::to_string(line_no) + " has a malformed label");
    }
    std::vector<double> vals(width - 1);
    for (std::size_t j = 1; j < width; ++j) {
      const auto f = trim(fields[j]);
      auto r = std::from_chars(f.data(), f.data() + f.size(), vals[j - 1]);
      if (r.ec != std::errc() || r.ptr != f.data() + f.size() || !std::isfinite(vals[j - 1])) {
        throw FormatError("load_csv: row " + std::to_string(line_no) + " column " + std::to_string(j + 1) +
                          " is not a number");
      }
    }
    rows.push_back(std::move(vals));
    labels.push_back(y);
  }
  if (rows.empty()) throw FormatError("load_csv: no data rows in " + path.string());
  Dataset ds;
  ds.inputs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j + 1 < width; ++j) {
      ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  ds.labels = std::move(labels);
  ds.num_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  ds.provenance = "csv:" + path.filename().string();
  if (rescale) {
    const double lo = ds.inputs.minCoeff();
    const double hi = ds.inputs.maxCoeff();
    if (hi > lo) {
      ds.inputs = ((ds.inputs.array() - lo) / (hi - lo) - 0.5).matrix();
      ds.inputs = ds.inputs.cwiseMax(-0.5).cwiseMin(0.5);
    } else {
      ds.inputs.setZero();
    }
    ds.provenance += "[rescaled]";
  } else if (ds.inputs.cwiseAbs().maxCoeff() > 0.5) {
    for (Eigen::Index i = 0; i < ds.inputs.rows(); ++i) {
      if (ds.inputs.row(i).cwiseAbs().maxCoeff() > 0.5) {
        throw FormatError("load_csv: data row " + std::to_string(i + 1) +
                          " lies outside [-1/2, 1/2]; pass --rescale to map the observed range onto the cube");
      }
    }
  }
  ds.validate();
  return ds;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("save_csv: cannot open " + path.string());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << data.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << ',' << format_double(data.inputs(i, j));
    out << '\n';
  }
  if (!out) throw FormatError("save_csv: write failed for " + path.string());
}

void save_metadata(const Dataset& data, const LowRankParams& params, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["d"] = data.dim();
  meta["c"] = data.num_classes;
  meta["n"] = data.size();
  meta["seed"] = params.seed;
  meta["provenance"] = data.provenance;
  meta["generator"] = {{"kind", "lowrank"},
                       {"intrinsic_dim", params.intrinsic_dim},
                       {"noise_std", params.noise_std},
                       {"separation", params.separation},
                       {"num_samples", params.num_samples}};
  std::ofstream out(path);
  if (!out) throw FormatError("save_metadata: cannot open " + path.string());
  out << meta.dump(2) << '\n';
}

}  // namespace prs
