#include <algorithm>
#include <cmath>
#include <functional>

#include "kra/error.hpp"
#include "kra/spectrum.hpp"

namespace kra {

double effective_rank(const Spectrum& s) {
  double total = 0.0;
  for (double x : s.values()) total += x;
  if (!(total > 0.0)) fail(ErrorCode::kZeroMatrix, "effective_rank: all singular values are zero");
  // -sum p log p with p = s / total, rearranged as log(total) - sum(s log s) / total.
  double weighted = 0.0;
  for (double x : s.values()) {
    if (x > 0.0) weighted += x * std::log(x);
  }
  const double entropy = std::log(total) - weighted / total;
  return std::exp(std::max(entropy, 0.0));
}

double spectra_error(const Spectrum& a, const Spectrum& b, SpectraErrorMode mode) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::kShapeMismatch, "spectra_error: spectra come from differently shaped matrices");
  }
  if (a.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += mode == SpectraErrorMode::kAbs ? std::abs(d) : d * d;
  }
  return sum / static_cast<double>(a.size());
}

std::size_t numerical_rank(const Spectrum& s, double tol_ratio) {
  if (!(tol_ratio > 0.0 && tol_ratio < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "numerical_rank: tol_ratio must lie in (0, 1)");
  }
  if (s.size() == 0 || s.max() == 0.0) return 0;
  const double threshold = tol_ratio * s.max();
  return static_cast<std::size_t>(
      std::count_if(s.values().begin(), s.values().end(), [&](double x) { return x > threshold; }));
}

double nuclear_norm(const Spectrum& s) noexcept {
  double sum = 0.0;
  for (double x : s.values()) sum += x;
  return sum;
}

Spectrum kron_spectrum(const Spectrum& a, const Spectrum& b) {
  const std::size_t rows = a.rows() * b.rows();
  const std::size_t cols = a.cols() * b.cols();
  std::vector<double> values;
  values.reserve(std::min(rows, cols));
  for (double x : a.values()) {
    for (double y : b.values()) values.push_back(x * y);
  }
  std::sort(values.begin(), values.end(), std::greater<>());
  values.resize(std::min(rows, cols), 0.0);
  return Spectrum(std::move(values), rows, cols);
}

}  // namespace kra
