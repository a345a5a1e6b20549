#include "kra/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "kra/error.hpp"
#include "kra/linalg.hpp"
#include "kra/random.hpp"

namespace kra {

std::string_view to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::kNormal: return "normal";
    case TargetKind::kSparse: return "sparse";
    case TargetKind::kWhitened: return "whitened";
    case TargetKind::kLowRank: return "lowrank";
    case TargetKind::kSinusoid: return "sinusoid";
    case TargetKind::kFile: return "file";
  }
  return "unknown";
}

void validate(const TargetSpec& s) {
  auto bad = [&](const std::string& why) {
    fail(ErrorCode::kInvalidConfig, "target " + s.name + ": " + why);
  };
  if (s.kind != TargetKind::kFile && (s.rows == 0 || s.cols == 0)) bad("dimensions must be positive");
  switch (s.kind) {
    case TargetKind::kSparse:
      if (!(s.zero_fraction >= 0.0 && s.zero_fraction < 1.0)) bad("zero fraction must lie in [0, 1)");
      break;
    case TargetKind::kLowRank:
      if (!(s.keep_fraction > 0.0 && s.keep_fraction <= 1.0)) bad("keep fraction must lie in (0, 1]");
      break;
    case TargetKind::kWhitened:
      if (s.rows < s.cols) bad("whitening needs rows >= cols");
      break;
    case TargetKind::kSinusoid:
      if (!std::isfinite(s.f_min) || !std::isfinite(s.f_max) || s.f_min > s.f_max) {
        bad("frequencies must satisfy f_min <= f_max");
      }
      if (s.superpose < 1 || s.superpose > 5) bad("superpose must lie in [1, 5]");
      break;
    case TargetKind::kFile:
      if (s.path.empty()) bad("file target needs a path");
      break;
    case TargetKind::kNormal: break;
  }
}

TargetSpec target_preset(const std::string& name, std::size_t rows, std::size_t cols) {
  TargetSpec s;
  s.name = name;
  s.rows = rows;
  s.cols = cols;
  if (name == "normal") {
    s.kind = TargetKind::kNormal;
  } else if (name == "sparse90") {
    s.kind = TargetKind::kSparse;
  } else if (name == "whitened") {
    s.kind = TargetKind::kWhitened;
  } else if (name == "lowrank") {
    s.kind = TargetKind::kLowRank;
  } else if (name == "highfreq") {
    s.kind = TargetKind::kSinusoid;
    s.f_min = 1000.0;
    s.f_max = 10000.0;
  } else if (name == "lowfreq") {
    s.kind = TargetKind::kSinusoid;
    s.f_min = 1.0;
    s.f_max = 1000.0;
  } else if (name == "lowfreq100") {
    s.kind = TargetKind::kSinusoid;
    s.f_min = 1.0;
    s.f_max = 100.0;
  } else if (name.rfind("file:", 0) == 0) {
    s.kind = TargetKind::kFile;
    s.path = name.substr(5);
  } else {
    fail(ErrorCode::kInvalidConfig,
         "unknown target '" + name +
             "' (expected normal, sparse90, whitened, lowrank, highfreq, lowfreq, lowfreq100 or file:<path>)");
  }
  return s;
}

std::vector<std::string> default_target_names() {
  return {"normal", "sparse90", "whitened", "lowrank", "highfreq", "lowfreq"};
}

DenseMatrix gen_normal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  RandomStream stream(seed, "target/normal");
  return random_normal(rows, cols, stream);
}

DenseMatrix gen_sparse(std::size_t rows, std::size_t cols, double zero_fraction, std::uint64_t seed) {
  if (!(zero_fraction >= 0.0 && zero_fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "gen_sparse: zero fraction must lie in [0, 1)");
  }
  DenseMatrix m = gen_normal(rows, cols, seed);
  const std::size_t n = m.size();
  const auto zeros = static_cast<std::size_t>(std::floor(zero_fraction * static_cast<double>(n)));
  // Partial Fisher-Yates: the first `zeros` slots of the shuffle are cleared.
  std::vector<std::uint32_t> index(n);
  std::iota(index.begin(), index.end(), 0u);
  RandomStream stream(seed, "target/sparse/mask");
  auto data = m.data();
  for (std::size_t k = 0; k < zeros; ++k) {
    const std::size_t j = k + stream.below(n - k);
    std::swap(index[k], index[j]);
    data[index[k]] = 0.0;
  }
  return m;
}

DenseMatrix whiten(const DenseMatrix& x) {
  if (x.rows() < x.cols()) fail(ErrorCode::kInvalidArgument, "whiten: needs rows >= cols");
  // X = U S V^T, so X^T X / rows = V (S^2 / rows) V^T.
  const SvdResult f = svd(x);
  const double n = static_cast<double>(x.rows());
  DenseMatrix projected = matmul(x, f.right);
  for (std::size_t k = 0; k < f.spectrum.size(); ++k) {
    const double eig = f.spectrum[k] * f.spectrum[k] / n;
    if (eig < 1e-12) {
      fail(ErrorCode::kDegenerateCovariance,
           "whiten: covariance eigenvalue " + std::to_string(eig) + " below 1e-12");
    }
  }
  for (std::size_t i = 0; i < projected.rows(); ++i) {
    auto row = projected.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] *= std::sqrt(n) / f.spectrum[k];
  }
  return projected;
}

DenseMatrix gen_whitened(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  RandomStream stream(seed, "target/whitened");
  return whiten(random_normal(rows, cols, stream));
}

std::size_t lowrank_keep_count(std::size_t rows, std::size_t cols, double keep_fraction) {
  const double raw = keep_fraction * static_cast<double>(std::min(rows, cols));
  // Guard against 0.25 * 768 landing a hair above 192 in floating point.
  auto keep = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(keep, 1, std::min(rows, cols));
}

DenseMatrix gen_lowrank(std::size_t rows, std::size_t cols, double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "gen_lowrank: keep fraction must lie in (0, 1]");
  }
  RandomStream stream(seed, "target/lowrank");
  const SvdResult f = svd(random_normal(rows, cols, stream));
  const std::size_t keep = lowrank_keep_count(rows, cols, keep_fraction);
  DenseMatrix left(rows, keep);
  DenseMatrix right(cols, keep);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < keep; ++k) left(i, k) = f.left(i, k) * f.spectrum[k];
  }
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t k = 0; k < keep; ++k) right(j, k) = f.right(j, k);
  }
  return matmul_nt(left, right);
}

DenseMatrix gen_sinusoid(std::size_t rows, std::size_t cols, double f_min, double f_max,
                         std::size_t superpose, std::uint64_t seed) {
  if (!(f_min <= f_max) || superpose < 1 || superpose > 5) {
    fail(ErrorCode::kInvalidArgument, "gen_sinusoid: need f_min <= f_max and superpose in [1, 5]");
  }
  RandomStream stream(seed, "target/sinusoid");
  const double step = rows > 1 ? (f_max - f_min) / static_cast<double>(rows - 1) : 0.0;
  const double two_pi = 2.0 * std::numbers::pi;
  const double weight = 1.0 / static_cast<double>(superpose);
  DenseMatrix m(rows, cols);
  std::vector<double> freqs(superpose);
  for (std::size_t i = 0; i < rows; ++i) {
    const double fi = f_min + step * static_cast<double>(i);
    freqs[0] = fi;
    for (std::size_t s = 1; s < superpose; ++s) {
      const double lo = std::max(f_min, fi - step / 2.0);
      const double hi = std::min(f_max, fi + step / 2.0);
      freqs[s] = stream.uniform(lo, hi);
    }
    auto row = m.row(i);
    for (std::size_t j = 0; j < cols; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(cols);
      double sum = 0.0;
      for (double f : freqs) sum += std::sin(two_pi * f * t);
      row[j] = weight * sum;
    }
  }
  return m;
}

DenseMatrix generate(const TargetSpec& s) {
  validate(s);
  switch (s.kind) {
    case TargetKind::kNormal: return gen_normal(s.rows, s.cols, s.seed);
    case TargetKind::kSparse: return gen_sparse(s.rows, s.cols, s.zero_fraction, s.seed);
    case TargetKind::kWhitened: return gen_whitened(s.rows, s.cols, s.seed);
    case TargetKind::kLowRank: return gen_lowrank(s.rows, s.cols, s.keep_fraction, s.seed);
    case TargetKind::kSinusoid:
      return gen_sinusoid(s.rows, s.cols, s.f_min, s.f_max, s.superpose, s.seed);
    case TargetKind::kFile: return load_matrix(s.path, s.crop);
  }
  return {};
}

TargetMatrix make_target(const TargetSpec& spec) {
  TargetMatrix t{spec, generate(spec), {}};
  t.spec.rows = t.matrix.rows();
  t.spec.cols = t.matrix.cols();
  t.spectrum = singular_values(t.matrix);
  return t;
}

}  // namespace kra
