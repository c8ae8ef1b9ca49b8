#pragma once

#include "prs/classifier.hpp"
#include "prs/projection.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace prs {

// Binary files are little-endian regardless of host byte order.
//
// Basis file:
//   "PRSBASIS" | u32 version=1 | u64 d | u64 p | u32 kind (0 pca, 1 random, 2 identity)
//   | u64 seed | u32 has_mean | f64 U[d][p] row-major | f64 V[d][d-p] row-major | f64 mean[d] if has_mean
//
// Model file:
//   "PRSMODEL" | u32 version=1 | u32 activation (0 tanh, 1 softplus) | u64 seed | u32 L+1
//   | u32 widths[L+1] | per layer: f64 W[out][in] row-major, f64 b[out]
void write_basis(const ProjectionBasis& basis, std::ostream& out);
ProjectionBasis read_basis(std::istream& in);
void save_basis(const ProjectionBasis& basis, const std::filesystem::path& path);
ProjectionBasis load_basis(const std::filesystem::path& path);

void write_model(const MlpClassifier& model, std::ostream& out);
MlpClassifier read_model(std::istream& in);
void save_model(const MlpClassifier& model, const std::filesystem::path& path);
MlpClassifier load_model(const std::filesystem::path& path);

/// Shortest decimal text that round-trips to the same double; "-inf", "inf", "nan" otherwise.
std::string format_double(double value);

}  // namespace prs
