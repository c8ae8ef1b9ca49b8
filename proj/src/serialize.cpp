#include "prs/serialize.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace prs {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& out, std::uint64_t bits, int width) {
  std::array<char, 8> buf{};
  for (int i = 0; i < width; ++i) buf[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf.data(), width);
}

std::uint64_t get_bytes(std::istream& in, int width) {
  std::array<unsigned char, 8> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), width);
  if (!in) throw FormatError("unexpected end of binary file");
  std::uint64_t bits = 0;
  for (int i = 0; i < width; ++i) bits |= static_cast<std::uint64_t>(buf[static_cast<std::size_t>(i)]) << (8 * i);
  return bits;
}

void put_u32(std::ostream& out, std::uint32_t v) { put_bytes(out, v, 4); }
void put_u64(std::ostream& out, std::uint64_t v) { put_bytes(out, v, 8); }
void put_f64(std::ostream& out, double v) { put_bytes(out, std::bit_cast<std::uint64_t>(v), 8); }
std::uint32_t get_u32(std::istream& in) { return static_cast<std::uint32_t>(get_bytes(in, 4)); }
std::uint64_t get_u64(std::istream& in) { return get_bytes(in, 8); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_bytes(in, 8)); }

void put_matrix_rows(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
  }
}

Matrix get_matrix_rows(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = get_f64(in);
  }
  return m;
}

void expect_magic(std::istream& in, const char (&magic)[9]) {
  char buf[8];
  in.read(buf, 8);
  if (!in || std::memcmp(buf, magic, 8) != 0) throw FormatError(std::string("bad magic: expected ") + magic);
  if (get_u32(in) != kVersion) throw FormatError(std::string("unsupported version in ") + magic + " file");
}

constexpr std::uint64_t kMaxDim = 1u << 24;

}  // namespace

void write_basis(const ProjectionBasis& basis, std::ostream& out) {
  out.write("PRSBASIS", 8);
  put_u32(out, kVersion);
  put_u64(out, static_cast<std::uint64_t>(basis.ambient_dim()));
  put_u64(out, static_cast<std::uint64_t>(basis.projected_dim()));
  put_u32(out, static_cast<std::uint32_t>(basis.kind()));
  put_u64(out, basis.seed());
  put_u32(out, basis.mean().size() > 0 ? 1 : 0);
  put_matrix_rows(out, basis.u());
  put_matrix_rows(out, basis.v());
  for (Eigen::Index i = 0; i < basis.mean().size(); ++i) put_f64(out, basis.mean()(i));
}

ProjectionBasis read_basis(std::istream& in) {
  expect_magic(in, "PRSBASIS");
  const std::uint64_t d = get_u64(in);
  const std::uint64_t p = get_u64(in);
  if (d < 1 || d > kMaxDim || p < 1 || p > d) throw FormatError("basis file: invalid dimensions");
  const std::uint32_t kind = get_u32(in);
  if (kind > 2) throw FormatError("basis file: unknown basis kind");
  const std::uint64_t seed = get_u64(in);
  const std::uint32_t has_mean = get_u32(in);
  const auto di = static_cast<Eigen::Index>(d);
  const auto pi = static_cast<Eigen::Index>(p);
  Matrix u = get_matrix_rows(in, di, pi);
  Matrix v = get_matrix_rows(in, di, di - pi);
  Vector mean;
  if (has_mean) {
    mean.resize(di);
    for (Eigen::Index i = 0; i < di; ++i) mean(i) = get_f64(in);
  }
  return ProjectionBasis(std::move(u), std::move(v), static_cast<BasisKind>(kind), seed, std::move(mean));
}

void write_model(const MlpClassifier& model, std::ostream& out) {
  out.write("PRSMODEL", 8);
  put_u32(out, kVersion);
  put_u32(out, model.activation() == Activation::kTanh ? 0 : 1);
  put_u64(out, model.seed());
  put_u32(out, static_cast<std::uint32_t>(model.layer_dims().size()));
  for (int w : model.layer_dims()) put_u32(out, static_cast<std::uint32_t>(w));
  for (int l = 0; l < model.num_layers(); ++l) {
    put_matrix_rows(out, model.weight(l));
    for (Eigen::Index i = 0; i < model.bias(l).size(); ++i) put_f64(out, model.bias(l)(i));
  }
}

MlpClassifier read_model(std::istream& in) {
  expect_magic(in, "PRSMODEL");
  const std::uint32_t act = get_u32(in);
  if (act > 1) throw FormatError("model file: unknown activation");
  const std::uint64_t seed = get_u64(in);
  const std::uint32_t count = get_u32(in);
  if (count < 2 || count > 64) throw FormatError("model file: invalid layer count");
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t w = get_u32(in);
    if (w < 1 || w > kMaxDim) throw FormatError("model file: invalid layer width");
    dims.push_back(static_cast<int>(w));
  }
  MlpClassifier m = MlpClassifier::initialize(dims, act == 0 ? Activation::kTanh : Activation::kSoftplus, seed);
  for (int l = 0; l < m.num_layers(); ++l) {
    m.weight(l) = get_matrix_rows(in, m.weight(l).rows(), m.weight(l).cols());
    for (Eigen::Index i = 0; i < m.bias(l).size(); ++i) m.bias(l)(i) = get_f64(in);
  }
  return m;
}

void save_basis(const ProjectionBasis& basis, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_basis(basis, out);
  if (!out) throw FormatError("write failed for " + path.string());
}

ProjectionBasis load_basis(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_basis(in);
}

void save_model(const MlpClassifier& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_model(model, out);
  if (!out) throw FormatError("write failed for " + path.string());
}

MlpClassifier load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_model(in);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace prs
