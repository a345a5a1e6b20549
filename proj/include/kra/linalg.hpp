#pragma once

#include <vector>

#include "kra/matrix.hpp"

namespace kra {

// Column-wise vectorisation: out[j * rows + i] = M(i, j).
std::vector<double> vec(const DenseMatrix& m);

// Kronecker product, (a1*b1) x (a2*b2).
DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b);

// Khatri-Rao (column-wise Kronecker) product of U (k1 x c) and V (k2 x c):
// row i*k2 + b of the result is U(i, :) .* V(b, :).
DenseMatrix khatri_rao(const DenseMatrix& u, const DenseMatrix& v);

DenseMatrix transpose(const DenseMatrix& m);

// Dense products backed by Eigen's GEMM.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// a^T * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// a * b^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& m, double factor);
void scale_in_place(DenseMatrix& m, double factor) noexcept;

// First `rows` rows of m.
DenseMatrix leading_rows(const DenseMatrix& m, std::size_t rows);
DenseMatrix block(const DenseMatrix& m, std::size_t row0, std::size_t col0, std::size_t rows,
                  std::size_t cols);

double frobenius_norm(const DenseMatrix& m) noexcept;
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what);

}  // namespace kra
