#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kra/adapters.hpp"
#include "kra/matrix.hpp"

namespace kra {

struct VerifyOutcome {
  std::string name;
  std::size_t trials = 0;
  std::size_t passes = 0;
  // Check-specific worst case (min sigma ratio, max residual, ...).
  double worst = 0.0;
  std::string statistic;
  bool pass = false;
  std::string detail;
};

// Every trial draws U, V (k x d_in), Gaussian on even trials and
// uniform[-1, 1] on odd ones, and requires numerical_rank(U (.) V) == d_in.
// Throws HypothesisViolation unless k <= d_in <= k^2.
VerifyOutcome verify_full_rank(std::size_t k, std::size_t d_in, std::size_t trials,
                               std::uint64_t seed);

// Negative control: U and V share one duplicated column index, so two columns
// of U (.) V coincide. Passes when the rank check reports the deficiency.
VerifyOutcome verify_full_rank_control(std::size_t k, std::size_t d_in, std::uint64_t seed);

struct KRDecomposition {
  DenseMatrix u_bar;  // m x r, unit columns
  DenseMatrix v_bar;  // n x r, unit columns
  std::vector<double> sigma;
};

// vec(W) = (v_bar (.) u_bar) * sigma, from the SVD of W.
KRDecomposition kr_decompose(const DenseMatrix& w);

// Builds a rank-r m x n matrix scaled by `scale` and checks
// max |vec(W) - (v_bar (.) u_bar) sigma| <= 1e-9 ||W||_F.
VerifyOutcome verify_kr_decomposition(std::size_t m, std::size_t n, std::size_t r,
                                      std::uint64_t seed, double scale = 1.0);

// Exhaustive scan of d_in * (k1 + ceil(d_out / k1)) over k1 in [1, d_out].
VerifyOutcome verify_param_minimum(std::size_t d_out, std::size_t d_in);

// Mean effective-rank ratio of a random KRAdapter update over a
// parameter-matched single Kronecker product; passes when the mean > 1.05.
VerifyOutcome compare_effrank_kr_vs_kron(std::size_t d_out, std::size_t d_in, std::size_t trials,
                                         std::uint64_t seed);

// Max per-tensor relative error between backward_delta and central
// differences of the MSE loss for one adapter kind.
double gradcheck(AdapterKind kind, std::size_t d_out, std::size_t d_in, double h,
                 std::uint64_t seed);

VerifyOutcome gradcheck_all(std::size_t d_out, std::size_t d_in, double h, double tol,
                            std::uint64_t seed);

std::string format_outcome(const VerifyOutcome& outcome);
std::string outcomes_json(const std::vector<VerifyOutcome>& outcomes);

}  // namespace kra
