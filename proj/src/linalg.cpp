#include "kra/linalg.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "kra/error.hpp"

namespace kra {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor, Eigen::Aligned64>;
using MutMap = Eigen::Map<RowMajor, Eigen::Aligned64>;

ConstMap view(const DenseMatrix& m) {
  return ConstMap(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

MutMap view(DenseMatrix& m) {
  return MutMap(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

std::string shape(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_product_size(std::size_t rows, std::size_t cols) {
  if (rows != 0 && cols > kMaxElements / rows) {
    fail(ErrorCode::kDimensionOverflow,
         "product of shape " + std::to_string(rows) + "x" + std::to_string(cols) +
             " exceeds the element limit");
  }
}

}  // namespace

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::kShapeMismatch, std::string(what) + ": " + shape(a) + " vs " + shape(b));
  }
}

std::vector<double> vec(const DenseMatrix& m) {
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[j * m.rows() + i] = m(i, j);
  }
  return out;
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.empty() || b.empty()) fail(ErrorCode::kInvalidArgument, "kron: empty factor");
  const std::size_t rows = a.rows() * b.rows();
  const std::size_t cols = a.cols() * b.cols();
  check_product_size(rows, cols);
  DenseMatrix out(rows, cols);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t p = 0; p < b.rows(); ++p) {
      auto dst = out.row(i * b.rows() + p);
      const auto brow = b.row(p);
      for (std::size_t j = 0; j < a.cols(); ++j) {
        const double s = a(i, j);
        double* d = dst.data() + j * b.cols();
        for (std::size_t q = 0; q < b.cols(); ++q) d[q] = s * brow[q];
      }
    }
  }
  return out;
}

DenseMatrix khatri_rao(const DenseMatrix& u, const DenseMatrix& v) {
  if (u.cols() != v.cols()) {
    fail(ErrorCode::kColumnMismatch, "khatri_rao: " + shape(u) + " and " + shape(v));
  }
  if (u.empty()) fail(ErrorCode::kInvalidArgument, "khatri_rao: empty factor");
  const std::size_t cols = u.cols();
  check_product_size(u.rows() * v.rows(), cols);
  DenseMatrix out(u.rows() * v.rows(), cols);
  for (std::size_t i = 0; i < u.rows(); ++i) {
    const double* urow = u.row(i).data();
    for (std::size_t b = 0; b < v.rows(); ++b) {
      const double* vrow = v.row(b).data();
      double* dst = out.row(i * v.rows() + b).data();
#pragma omp simd
      for (std::size_t j = 0; j < cols; ++j) dst[j] = urow[j] * vrow[j];
    }
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix out(m.cols(), m.rows());
  view(out) = view(m).transpose();
  return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) fail(ErrorCode::kShapeMismatch, "matmul: " + shape(a) + " * " + shape(b));
  DenseMatrix out(a.rows(), b.cols());
  view(out).noalias() = view(a) * view(b);
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::kShapeMismatch, "matmul_tn: " + shape(a) + "^T * " + shape(b));
  }
  DenseMatrix out(a.cols(), b.cols());
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorCode::kShapeMismatch, "matmul_nt: " + shape(a) + " * " + shape(b) + "^T");
  }
  DenseMatrix out(a.rows(), b.rows());
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "add");
  DenseMatrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] += bd[k];
  return out;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "subtract");
  DenseMatrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] -= bd[k];
  return out;
}

DenseMatrix scaled(const DenseMatrix& m, double factor) {
  DenseMatrix out = m;
  scale_in_place(out, factor);
  return out;
}

void scale_in_place(DenseMatrix& m, double factor) noexcept {
  for (double& x : m.data()) x *= factor;
}

DenseMatrix leading_rows(const DenseMatrix& m, std::size_t rows) {
  return block(m, 0, 0, rows, m.cols());
}

DenseMatrix block(const DenseMatrix& m, std::size_t row0, std::size_t col0, std::size_t rows,
                  std::size_t cols) {
  if (rows == 0 || cols == 0 || row0 + rows > m.rows() || col0 + cols > m.cols()) {
    fail(ErrorCode::kInvalidArgument, "block out of range for " + shape(m));
  }
  DenseMatrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto src = m.row(row0 + i).subspan(col0, cols);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

double frobenius_norm(const DenseMatrix& m) noexcept {
  double sum = 0.0;
  for (double x : m.data()) sum += x * x;
  return std::sqrt(sum);
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(a.data()[k] - b.data()[k]));
  }
  return worst;
}

}  // namespace kra
