#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kra/error.hpp"
#include "kra/linalg.hpp"
#include "kra/spectrum.hpp"

namespace kra {

namespace {

double dot(const double* a, const double* b, std::size_t n) noexcept {
  double sum = 0.0;
#pragma omp simd reduction(+ : sum)
  for (std::size_t k = 0; k < n; ++k) sum += a[k] * b[k];
  return sum;
}

void rotate(double* a, double* b, std::size_t n, double c, double s) noexcept {
#pragma omp simd
  for (std::size_t k = 0; k < n; ++k) {
    const double x = a[k];
    const double y = b[k];
    a[k] = c * x - s * y;
    b[k] = s * x + c * y;
  }
}

// Subtracts the projections of `x` onto the first `count` rows of `basis`.
void orthogonalize(double* x, const DenseMatrix& basis, std::size_t count, std::size_t n) noexcept {
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t k = 0; k < count; ++k) {
      const double* b = basis.row(k).data();
      const double proj = dot(x, b, n);
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) x[i] -= proj * b[i];
    }
  }
}

// Normalised left singular vectors (as rows). Columns of the rotated matrix are
// scaled by 1/sigma; numerically null directions are completed to an
// orthonormal set.
DenseMatrix left_vectors(const DenseMatrix& work, const std::vector<std::size_t>& order,
                         const std::vector<double>& sigma) {
  const std::size_t p = order.size();
  const std::size_t n = work.cols();
  const double sigma_max = sigma.empty() ? 0.0 : sigma.front();
  const double null_threshold = sigma_max * static_cast<double>(n) *
                                std::numeric_limits<double>::epsilon();
  DenseMatrix u(p, n);
  std::size_t next_basis = 0;
  for (std::size_t k = 0; k < p; ++k) {
    double* dst = u.row(k).data();
    const double* src = work.row(order[k]).data();
    if (sigma[k] > null_threshold && sigma[k] > 0.0) {
      for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] / sigma[k];
      if (sigma[k] < 1e-6 * sigma_max) {
        orthogonalize(dst, u, k, n);
        const double norm = std::sqrt(dot(dst, dst, n));
        for (std::size_t i = 0; i < n; ++i) dst[i] /= norm;
      }
      continue;
    }
    // Null direction: first canonical basis vector with a usable component
    // orthogonal to everything accepted so far.
    while (true) {
      if (next_basis >= n) fail(ErrorCode::kConvergenceFailure, "svd: basis completion failed");
      std::fill(dst, dst + n, 0.0);
      dst[next_basis++] = 1.0;
      orthogonalize(dst, u, k, n);
      const double norm = std::sqrt(dot(dst, dst, n));
      if (norm > 0.5) {
        for (std::size_t i = 0; i < n; ++i) dst[i] /= norm;
        break;
      }
    }
  }
  return u;
}

}  // namespace

Spectrum::Spectrum(std::vector<double> values, std::size_t rows, std::size_t cols)
    : values_(std::move(values)), rows_(rows), cols_(cols) {
  if (values_.size() != std::min(rows, cols)) {
    fail(ErrorCode::kInvalidArgument, "spectrum length must equal min(rows, cols)");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) {
      fail(ErrorCode::kInvalidArgument, "spectrum values must be finite and nonnegative");
    }
    if (i > 0 && values_[i] > values_[i - 1]) {
      fail(ErrorCode::kInvalidArgument, "spectrum values must be sorted descending");
    }
  }
}

Spectrum Spectrum::scaled(double factor) const {
  std::vector<double> out(values_);
  for (double& x : out) x *= std::abs(factor);
  return Spectrum(std::move(out), rows_, cols_);
}

SvdResult svd(const DenseMatrix& m, const SvdOptions& options) {
  if (m.empty()) fail(ErrorCode::kInvalidArgument, "svd: empty matrix");
  if (!m.all_finite()) fail(ErrorCode::kInvalidArgument, "svd: non-finite entries");

  // Rotate the columns of a tall matrix; wide inputs are handled through the
  // transpose and the factors swapped at the end.
  const bool wide = m.rows() < m.cols();
  // Rows of `work` are the columns being orthogonalised.
  DenseMatrix work = wide ? m : transpose(m);
  const std::size_t count = work.rows();
  const std::size_t length = work.cols();

  DenseMatrix vt;
  if (options.compute_vectors) vt = DenseMatrix::identity(count);

  std::vector<double> norms(count);
  double frob2 = 0.0;
  for (std::size_t p = 0; p < count; ++p) {
    norms[p] = dot(work.row(p).data(), work.row(p).data(), length);
    frob2 += norms[p];
  }
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor = eps * eps * frob2;

  int sweeps = 0;
  bool converged = count < 2;
  while (!converged) {
    if (sweeps >= options.max_sweeps) {
      fail(ErrorCode::kConvergenceFailure,
           "svd: no convergence after " + std::to_string(options.max_sweeps) + " sweeps");
    }
    ++sweeps;
    for (std::size_t p = 0; p < count; ++p) {
      norms[p] = dot(work.row(p).data(), work.row(p).data(), length);
    }
    std::size_t rotations = 0;
    for (std::size_t p = 0; p + 1 < count; ++p) {
      double* wp = work.row(p).data();
      for (std::size_t q = p + 1; q < count; ++q) {
        double* wq = work.row(q).data();
        const double g = dot(wp, wq, length);
        const double ag = std::abs(g);
        if (ag <= floor || ag <= options.tolerance * std::sqrt(norms[p] * norms[q])) continue;
        ++rotations;
        const double zeta = (norms[q] - norms[p]) / (2.0 * g);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(wp, wq, length, c, s);
        norms[p] -= t * g;
        norms[q] += t * g;
        if (options.compute_vectors) rotate(vt.row(p).data(), vt.row(q).data(), count, c, s);
      }
    }
    converged = rotations == 0;
  }

  std::vector<double> sigma(count);
  for (std::size_t p = 0; p < count; ++p) {
    sigma[p] = std::sqrt(dot(work.row(p).data(), work.row(p).data(), length));
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });
  std::vector<double> sorted(count);
  for (std::size_t k = 0; k < count; ++k) sorted[k] = sigma[order[k]];

  SvdResult result;
  result.sweeps = sweeps;
  result.spectrum = Spectrum(sorted, m.rows(), m.cols());
  if (!options.compute_vectors) return result;

  // u_rows: count x length, rows are left vectors of the tall problem.
  const DenseMatrix u_rows = left_vectors(work, order, sorted);
  DenseMatrix v_rows(count, count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto src = vt.row(order[k]);
    std::copy(src.begin(), src.end(), v_rows.row(k).begin());
  }
  if (wide) {
    result.left = transpose(v_rows);
    result.right = transpose(u_rows);
  } else {
    result.left = transpose(u_rows);
    result.right = transpose(v_rows);
  }
  return result;
}

Spectrum singular_values(const DenseMatrix& m) {
  if (m.empty()) fail(ErrorCode::kInvalidArgument, "singular_values: empty matrix");
  if (!m.all_finite()) fail(ErrorCode::kInvalidArgument, "singular_values: non-finite entries");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> map(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                                       static_cast<Eigen::Index>(m.cols()));
  const Eigen::MatrixXd dense = map;
  Eigen::BDCSVD<Eigen::MatrixXd> solver(dense);
  const auto& sv = solver.singularValues();
  std::vector<double> values(sv.data(), sv.data() + sv.size());
  std::sort(values.begin(), values.end(), std::greater<>());
  for (double& x : values) x = std::max(x, 0.0);
  return Spectrum(std::move(values), m.rows(), m.cols());
}

}  // namespace kra
