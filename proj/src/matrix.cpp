#include "kra/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "kra/error.hpp"

namespace kra {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0) {
    fail(ErrorCode::kInvalidArgument, "matrix dimensions must be positive");
  }
  if (rows > kMaxElements / cols) {
    fail(ErrorCode::kDimensionOverflow,
         std::to_string(rows) + "x" + std::to_string(cols) + " exceeds the element limit");
  }
  data_.assign(rows * cols, fill);
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0 || rows.begin()->size() == 0) {
    fail(ErrorCode::kInvalidArgument, "from_rows: empty matrix");
  }
  DenseMatrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    if (r.size() != m.cols()) fail(ErrorCode::kInvalidArgument, "from_rows: ragged rows");
    std::copy(r.begin(), r.end(), m.row(i++).begin());
  }
  return m;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::column(std::span<const double> values) {
  DenseMatrix m(values.size(), 1);
  std::copy(values.begin(), values.end(), m.data().begin());
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void DenseMatrix::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

bool operator==(const DenseMatrix& a, const DenseMatrix& b) noexcept {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
}

bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b) noexcept {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace kra
