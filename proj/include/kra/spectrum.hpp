#pragma once

#include <cstddef>
#include <vector>

#include "kra/matrix.hpp"

namespace kra {

// Descending singular values of a rows x cols matrix; always min(rows, cols)
// entries, trailing zeros kept so paired metrics line up.
class Spectrum {
 public:
  Spectrum() = default;
  Spectrum(std::vector<double> values, std::size_t rows, std::size_t cols);

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double max() const noexcept { return values_.empty() ? 0.0 : values_.front(); }

  // Every singular value multiplied by `factor` (|factor| used).
  Spectrum scaled(double factor) const;

  friend bool operator==(const Spectrum&, const Spectrum&) = default;

 private:
  std::vector<double> values_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

struct SvdOptions {
  double tolerance = 1e-12;
  int max_sweeps = 60;
  bool compute_vectors = true;
};

struct SvdResult {
  DenseMatrix left;   // rows x p, orthonormal columns
  Spectrum spectrum;  // p = min(rows, cols) values
  DenseMatrix right;  // cols x p, orthonormal columns
  int sweeps = 0;
};

// One-sided (Hestenes) cyclic Jacobi SVD. Throws ConvergenceFailure when the
// sweep cap is reached with pairs still above tolerance.
SvdResult svd(const DenseMatrix& m, const SvdOptions& options = {});

// Singular values only, via divide-and-conquer bidiagonal SVD. Used where a
// large number of spectra is needed and vectors are not.
Spectrum singular_values(const DenseMatrix& m);

// exp(-sum p_i log p_i) with p the sum-normalised spectrum; 0 log 0 := 0.
double effective_rank(const Spectrum& s);

enum class SpectraErrorMode { kAbs, kSquared };

// Mean |a_i - b_i| (kAbs) or mean (a_i - b_i)^2 (kSquared) over paired values.
double spectra_error(const Spectrum& a, const Spectrum& b, SpectraErrorMode mode);

inline constexpr double kDefaultRankTolerance = 1e-10;

// Count of values strictly above tol_ratio * values[0].
std::size_t numerical_rank(const Spectrum& s, double tol_ratio = kDefaultRankTolerance);

double nuclear_norm(const Spectrum& s) noexcept;

// Spectrum of A (x) B from the spectra of the factors: all pairwise products.
Spectrum kron_spectrum(const Spectrum& a, const Spectrum& b);

}  // namespace kra
