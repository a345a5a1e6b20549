#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kra/matrix.hpp"
#include "kra/matx_io.hpp"
#include "kra/spectrum.hpp"

namespace kra {

enum class TargetKind { kNormal, kSparse, kWhitened, kLowRank, kSinusoid, kFile };

std::string_view to_string(TargetKind kind);

struct TargetSpec {
  TargetKind kind = TargetKind::kNormal;
  // Identifier used in reports and file names ("normal", "highfreq", ...).
  std::string name = "normal";
  std::size_t rows = 1024;
  std::size_t cols = 768;
  std::uint64_t seed = 0;
  double zero_fraction = 0.9;
  double keep_fraction = 0.25;
  double f_min = 1.0;
  double f_max = 1000.0;
  std::size_t superpose = 1;
  std::string path;
  std::optional<Crop> crop;

  friend bool operator==(const TargetSpec&, const TargetSpec&) = default;
};

void validate(const TargetSpec& spec);

// Named presets: normal, sparse90, whitened, lowrank, highfreq ([1000, 10000]
// Hz), lowfreq ([1, 1000] Hz) and lowfreq100 ([1, 100] Hz). `file:<path>`
// selects an ingested matrix. Throws InvalidConfig for unknown names.
TargetSpec target_preset(const std::string& name, std::size_t rows, std::size_t cols);

// The six standard benchmark targets, in report order.
std::vector<std::string> default_target_names();

DenseMatrix gen_normal(std::size_t rows, std::size_t cols, std::uint64_t seed);
DenseMatrix gen_sparse(std::size_t rows, std::size_t cols, double zero_fraction, std::uint64_t seed);
// PCA whitening of the columns of x (rows >= cols).
DenseMatrix whiten(const DenseMatrix& x);
DenseMatrix gen_whitened(std::size_t rows, std::size_t cols, std::uint64_t seed);
// Number of singular values kept: ceil(keep_fraction * min(rows, cols)).
std::size_t lowrank_keep_count(std::size_t rows, std::size_t cols, double keep_fraction);
DenseMatrix gen_lowrank(std::size_t rows, std::size_t cols, double keep_fraction, std::uint64_t seed);
DenseMatrix gen_sinusoid(std::size_t rows, std::size_t cols, double f_min, double f_max,
                         std::size_t superpose, std::uint64_t seed);

DenseMatrix generate(const TargetSpec& spec);

struct TargetMatrix {
  TargetSpec spec;
  DenseMatrix matrix;
  Spectrum spectrum;
};

TargetMatrix make_target(const TargetSpec& spec);

}  // namespace kra
