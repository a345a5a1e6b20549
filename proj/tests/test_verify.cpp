#include <gtest/gtest.h>

#include <cmath>

#include "kra/error.hpp"
#include "kra/linalg.hpp"
#include "kra/random.hpp"
#include "kra/spectrum.hpp"
#include "kra/verify.hpp"

using namespace kra;

TEST(FullRank, SmallShapes) {
  for (auto [k, d] : {std::pair<std::size_t, std::size_t>{8, 64}, {16, 200}, {2, 4}, {5, 5}}) {
    const auto o = verify_full_rank(k, d, 100, 3);
    EXPECT_EQ(o.trials, 100u);
    EXPECT_EQ(o.passes, 100u) << k << "x" << d;
    EXPECT_TRUE(o.pass);
    EXPECT_GT(o.worst, 0.0);
  }
}

TEST(FullRank, HypothesisViolation) {
  try {
    verify_full_rank(32, 2000, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kHypothesisViolation);
    EXPECT_NE(std::string(e.what()).find("1024"), std::string::npos);
  }
  EXPECT_THROW(verify_full_rank(8, 4, 1, 0), Error);
}

TEST(FullRank, ControlDetectsDuplicatedColumn) {
  const auto o = verify_full_rank_control(8, 64, 1);
  EXPECT_TRUE(o.pass) << o.detail;
}

TEST(KrDecompose, ReconstructsAndHasUnitColumns) {
  RandomStream s(4, "test");
  const auto w = random_normal(6, 5, s);
  const auto d = kr_decompose(w);
  ASSERT_EQ(d.sigma.size(), 5u);
  for (std::size_t c = 0; c < 5; ++c) {
    double nu = 0, nv = 0;
    for (std::size_t i = 0; i < 6; ++i) nu += d.u_bar(i, c) * d.u_bar(i, c);
    for (std::size_t j = 0; j < 5; ++j) nv += d.v_bar(j, c) * d.v_bar(j, c);
    EXPECT_NEAR(nu, 1.0, 1e-12);
    EXPECT_NEAR(nv, 1.0, 1e-12);
  }
  // vec(W)[j*m + i] = sum_c v(j,c) u(i,c) sigma_c
  const auto kr = khatri_rao(d.v_bar, d.u_bar);
  const auto v = vec(w);
  for (std::size_t t = 0; t < v.size(); ++t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < 5; ++c) acc += kr(t, c) * d.sigma[c];
    EXPECT_NEAR(acc, v[t], 1e-12);
  }
}

TEST(KrDecompose, Examples) {
  for (auto [m, n, r] : {std::tuple<std::size_t, std::size_t, std::size_t>{64, 48, 12}, {10, 10, 10}, {7, 3, 1}}) {
    const auto o = verify_kr_decomposition(m, n, r, 2);
    EXPECT_TRUE(o.pass) << o.detail;
    EXPECT_LE(o.worst, 1e-9);
  }
}

TEST(KrDecompose, ResidualScalesLinearly) {
  const auto a = verify_kr_decomposition(20, 16, 4, 5, 1.0);
  const auto b = verify_kr_decomposition(20, 16, 4, 5, 1e6);
  EXPECT_TRUE(a.pass);
  EXPECT_TRUE(b.pass);
  // worst is relative to ||W||_F, so it is scale free up to rounding.
  EXPECT_LT(b.worst, 1e-12);
}

TEST(ParamMinimum, Examples) {
  const auto twelve = verify_param_minimum(12, 1);
  EXPECT_TRUE(twelve.pass) << twelve.detail;
  EXPECT_NE(twelve.detail.find("argmin k1=3"), std::string::npos) << twelve.detail;
  EXPECT_NE(twelve.detail.find("cost=7"), std::string::npos) << twelve.detail;
  for (std::size_t d : {1u, 512u, 768u, 1024u}) EXPECT_TRUE(verify_param_minimum(d, 1).pass) << d;
  const auto big = verify_param_minimum(1024, 768);
  EXPECT_NE(big.detail.find("cost=49152"), std::string::npos) << big.detail;
}

TEST(ParamMinimum, OracleScan) {
  // k1 = floor(sqrt(d)) attains the exhaustive minimum of k1 + ceil(d / k1).
  for (std::size_t d = 1; d <= 2000; ++d) {
    std::size_t best = SIZE_MAX;
    for (std::size_t k = 1; k <= d; ++k) best = std::min(best, k + (d + k - 1) / k);
    const auto [k1, k2] = kr_shape(d);
    ASSERT_EQ(k1 + k2, best) << d;
  }
}

TEST(EffRank, DegenerateAndSmall) {
  const auto one = compare_effrank_kr_vs_kron(1, 1, 2, 0);
  EXPECT_DOUBLE_EQ(one.worst, 1.0);
  EXPECT_FALSE(one.pass);
  const auto mid = compare_effrank_kr_vs_kron(96, 128, 4, 0);
  EXPECT_GT(mid.worst, 1.0);
}

TEST(GradCheck, AllAdapters) {
  for (AdapterKind kind : kAllAdapterKinds) EXPECT_LT(gradcheck(kind, 12, 8, 1e-6, 0), 1e-5) << to_string(kind);
  const auto o = gradcheck_all(9, 14, 1e-6, 1e-5, 2);
  EXPECT_TRUE(o.pass) << o.detail;
  EXPECT_EQ(o.trials, 5u);
}

TEST(Outcomes, Formatting) {
  VerifyOutcome o{"demo", 3, 3, 0.5, "min ratio", true, "ok"};
  const auto line = format_outcome(o);
  EXPECT_EQ(line.rfind("PASS demo", 0), 0u) << line;
  o.pass = false;
  EXPECT_EQ(format_outcome(o).rfind("FAIL demo", 0), 0u);
  EXPECT_NE(outcomes_json({o}).find("\"demo\""), std::string::npos);
}
