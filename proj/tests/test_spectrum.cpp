#include <gtest/gtest.h>

#include <cmath>

#include "kra/error.hpp"
#include "kra/linalg.hpp"
#include "kra/random.hpp"
#include "kra/spectrum.hpp"
#include "oracles.hpp"

using namespace kra;

namespace {

DenseMatrix randn(std::size_t r, std::size_t c, const char* name, std::uint64_t seed = 3) {
  RandomStream s(seed, name);
  return random_normal(r, c, s);
}

DenseMatrix reconstruct(const SvdResult& f) {
  DenseMatrix scaled_left = f.left;
  for (std::size_t i = 0; i < scaled_left.rows(); ++i)
    for (std::size_t k = 0; k < scaled_left.cols(); ++k) scaled_left(i, k) *= f.spectrum[k];
  return matmul_nt(scaled_left, f.right);
}

double orthonormality_error(const DenseMatrix& q) {
  const auto g = matmul_tn(q, q);
  return oracle::max_abs(g, DenseMatrix::identity(g.rows()));
}

Spectrum spec(std::vector<double> v, std::size_t rows, std::size_t cols) {
  return Spectrum(std::move(v), rows, cols);
}

}  // namespace

TEST(Svd, Diagonal) {
  const auto f = svd(DenseMatrix::from_rows({{3, 0}, {0, 1}}));
  EXPECT_DOUBLE_EQ(f.spectrum[0], 3.0);
  EXPECT_DOUBLE_EQ(f.spectrum[1], 1.0);
  const auto g = svd(DenseMatrix::from_rows({{1, 0}, {0, 3}}));
  EXPECT_DOUBLE_EQ(g.spectrum[0], 3.0);
}

TEST(Svd, RankOneOuterProduct) {
  auto u = randn(6, 1, "u");
  auto v = randn(4, 1, "v");
  scale_in_place(u, 1.0 / frobenius_norm(u));
  scale_in_place(v, 1.0 / frobenius_norm(v));
  const auto f = svd(matmul_nt(u, v));
  EXPECT_NEAR(f.spectrum[0], 1.0, 1e-14);
  for (std::size_t k = 1; k < f.spectrum.size(); ++k) EXPECT_LT(f.spectrum[k], 1e-14);
  EXPECT_LT(orthonormality_error(f.left), 1e-10);
}

TEST(Svd, ReconstructsRandomMatrices) {
  const std::pair<std::size_t, std::size_t> shapes[] = {{8, 5}, {5, 8}, {1, 7}, {7, 1}, {64, 64}, {256, 256}, {120, 40}};
  for (auto [r, c] : shapes) {
    const auto m = randn(r, c, "m", r * 1000 + c);
    const auto f = svd(m);
    ASSERT_EQ(f.left.rows(), r);
    ASSERT_EQ(f.right.rows(), c);
    EXPECT_LE(frobenius_norm(subtract(m, reconstruct(f))), 1e-10 * frobenius_norm(m)) << r << "x" << c;
    EXPECT_LT(orthonormality_error(f.left), 1e-10);
    EXPECT_LT(orthonormality_error(f.right), 1e-10);
    for (std::size_t k = 1; k < f.spectrum.size(); ++k) EXPECT_GE(f.spectrum[k - 1], f.spectrum[k]);
  }
}

TEST(Svd, RankDeficientKeepsOrthonormalFactors) {
  const auto m = matmul(randn(30, 3, "a"), randn(3, 20, "b"));
  const auto f = svd(m);
  EXPECT_LE(frobenius_norm(subtract(m, reconstruct(f))), 1e-10 * frobenius_norm(m));
  EXPECT_LT(orthonormality_error(f.left), 1e-10);
  EXPECT_LT(orthonormality_error(f.right), 1e-10);
  EXPECT_EQ(numerical_rank(f.spectrum), 3u);
}

TEST(Svd, ZeroMatrix) {
  const auto f = svd(DenseMatrix(4, 3));
  for (double s : f.spectrum.values()) EXPECT_EQ(s, 0.0);
  EXPECT_LT(orthonormality_error(f.left), 1e-12);
}

TEST(Svd, IterationCap) {
  SvdOptions opt;
  opt.max_sweeps = 1;
  try {
    svd(randn(40, 30, "m"), opt);
    FAIL() << "expected ConvergenceFailure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConvergenceFailure);
  }
}

TEST(Svd, RejectsNonFinite) {
  DenseMatrix m(2, 2);
  m(0, 0) = INFINITY;
  EXPECT_THROW(svd(m), Error);
  EXPECT_THROW(singular_values(m), Error);
}

TEST(SingularValues, AgreesWithJacobi) {
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{50, 30}, {30, 50}, {64, 64}}) {
    const auto m = randn(r, c, "m", r + c);
    const auto a = svd(m, {.compute_vectors = false}).spectrum;
    const auto b = singular_values(m);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-11 * a.max());
  }
}

TEST(Spectrum, Validation) {
  EXPECT_THROW(spec({1, 2}, 2, 2), Error);
  EXPECT_THROW(spec({1}, 2, 2), Error);
  EXPECT_THROW(spec({1, -1}, 2, 2), Error);
  EXPECT_NO_THROW(spec({2, 0}, 2, 3));
}

TEST(EffectiveRank, Examples) {
  EXPECT_DOUBLE_EQ(effective_rank(singular_values(DenseMatrix::identity(7))), 7.0);
  EXPECT_DOUBLE_EQ(effective_rank(spec({1, 0, 0}, 3, 3)), 1.0);
  const double expected = oracle::entropy_rank({2, 1});
  EXPECT_NEAR(expected, 1.889882, 1e-6);
  EXPECT_NEAR(effective_rank(spec({2, 1}, 2, 2)), expected, 1e-14);
}

TEST(EffectiveRank, ZeroSpectrum) {
  try {
    effective_rank(spec({0, 0}, 2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroMatrix);
  }
}

TEST(EffectiveRank, ScaleInvariantAndBounded) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = matmul(randn(40, 1 + seed * 5, "a", seed), randn(1 + seed * 5, 30, "b", seed));
    const auto s = singular_values(m);
    const double er = effective_rank(s);
    EXPECT_NEAR(effective_rank(singular_values(scaled(m, -3.5))), er, 1e-10 * er);
    EXPECT_NEAR(er, oracle::entropy_rank(s.values()), 1e-10 * er);
    EXPECT_GE(er, 1.0);
    EXPECT_LE(er, static_cast<double>(numerical_rank(s, 1e-12)) + 1e-9);
  }
}

TEST(SpectraError, Examples) {
  const auto a = spec({3, 1}, 2, 2);
  const auto b = spec({1, 1}, 2, 2);
  EXPECT_DOUBLE_EQ(spectra_error(a, a, SpectraErrorMode::kAbs), 0.0);
  EXPECT_DOUBLE_EQ(spectra_error(a, a, SpectraErrorMode::kSquared), 0.0);
  EXPECT_DOUBLE_EQ(spectra_error(a, b, SpectraErrorMode::kAbs), 1.0);
  EXPECT_DOUBLE_EQ(spectra_error(a, b, SpectraErrorMode::kSquared), 2.0);
  EXPECT_DOUBLE_EQ(spectra_error(b, a, SpectraErrorMode::kSquared), 2.0);
  try {
    spectra_error(a, spec({1, 1}, 2, 3), SpectraErrorMode::kAbs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(NumericalRank, Examples) {
  EXPECT_EQ(numerical_rank(spec({5, 3, 1e-14}, 3, 3), 1e-10), 2u);
  EXPECT_EQ(numerical_rank(singular_values(DenseMatrix::identity(4))), 4u);
  EXPECT_EQ(numerical_rank(spec({0, 0}, 2, 2)), 0u);
  EXPECT_THROW(numerical_rank(spec({1}, 1, 1), 1.5), Error);
  EXPECT_THROW(numerical_rank(spec({1}, 1, 1), 0.0), Error);
}

TEST(Norms, NuclearAndFrobenius) {
  const auto d = DenseMatrix::from_rows({{3, 0}, {0, 4}});
  EXPECT_NEAR(nuclear_norm(singular_values(d)), 7.0, 1e-14);
  EXPECT_EQ(nuclear_norm(singular_values(DenseMatrix(3, 2))), 0.0);
  const auto r1 = matmul_nt(randn(5, 1, "u"), randn(4, 1, "v"));
  EXPECT_NEAR(nuclear_norm(singular_values(r1)), frobenius_norm(r1), 1e-12);
}

TEST(KronSpectrum, MatchesDirectSvd) {
  const auto a = randn(6, 4, "a");
  const auto b = randn(3, 5, "b");
  const auto direct = singular_values(kron(a, b));
  const auto ident = kron_spectrum(singular_values(a), singular_values(b));
  ASSERT_EQ(direct.size(), ident.size());
  for (std::size_t k = 0; k < direct.size(); ++k) EXPECT_NEAR(direct[k], ident[k], 1e-11 * direct.max());
}
