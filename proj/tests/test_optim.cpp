#include <gtest/gtest.h>

#include <cmath>

#include "kra/error.hpp"
#include "kra/linalg.hpp"
#include "kra/optim.hpp"
#include "kra/random.hpp"
#include "kra/targets.hpp"

using namespace kra;

namespace {

NamedMatrices scalar(double x) { return {{"theta", DenseMatrix::from_rows({{x}})}}; }

}  // namespace

TEST(MseLoss, Examples) {
  const auto t = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  const auto same = mse_loss(t, t);
  EXPECT_EQ(same.loss, 0.0);
  EXPECT_EQ(same.grad, DenseMatrix(2, 2));
  const auto one = mse_loss(DenseMatrix::from_rows({{2}}), DenseMatrix::from_rows({{0}}));
  EXPECT_DOUBLE_EQ(one.loss, 4.0);
  EXPECT_DOUBLE_EQ(one.grad(0, 0), 4.0);
  const auto e = DenseMatrix::from_rows({{1, 0}, {0, 1}});
  const double base = mse_loss(add(t, e), t).loss;
  EXPECT_DOUBLE_EQ(mse_loss(add(t, scaled(e, 2.0)), t).loss, 4.0 * base);
  EXPECT_THROW(mse_loss(DenseMatrix(2, 2), DenseMatrix(2, 3)), Error);
}

TEST(AdamW, SingleStepHandValue) {
  OptimHyper hp;
  auto p = scalar(1.0);
  auto st = make_optim_state(p);
  adamw_step(p, scalar(1.0), st, hp);
  // m_hat = v_hat = 1: 1 - 0.01 * 1 / (1 + 1e-8) - 0.01 * 0.01 * 1
  EXPECT_NEAR(p[0].second(0, 0), 1.0 - 0.01 / (1.0 + 1e-8) - 1e-4, 1e-15);
  EXPECT_NEAR(p[0].second(0, 0), 0.98990, 1e-5);
  EXPECT_EQ(st.step, 1u);
}

TEST(AdamW, ZeroGradient) {
  OptimHyper hp;
  hp.weight_decay = 0.0;
  auto p = scalar(1.0);
  auto st = make_optim_state(p);
  adamw_step(p, scalar(0.0), st, hp);
  EXPECT_EQ(p[0].second(0, 0), 1.0);

  hp.weight_decay = 0.01;
  adamw_step(p, scalar(0.0), st, hp);
  EXPECT_DOUBLE_EQ(p[0].second(0, 0), 0.9999);
}

TEST(AdamW, DegeneratesToSignDescent) {
  OptimHyper hp;
  hp.beta1 = 0.0;
  hp.beta2 = 0.0;
  hp.epsilon = 0.0;
  hp.weight_decay = 0.0;
  hp.lr = 0.25;
  for (double g : {3.0, -0.001, 1e6}) {
    auto p = scalar(2.0);
    auto st = make_optim_state(p);
    adamw_step(p, scalar(g), st, hp);
    EXPECT_EQ(p[0].second(0, 0), 2.0 - 0.25 * (g > 0 ? 1.0 : -1.0));
  }
}

TEST(AdamW, NonFiniteGradientLeavesParametersUntouched) {
  OptimHyper hp;
  NamedMatrices p = {{"a", DenseMatrix(2, 2, 1.0)}, {"b", DenseMatrix(1, 1, 1.0)}};
  NamedMatrices g = {{"a", DenseMatrix(2, 2, 1.0)}, {"b", DenseMatrix(1, 1, NAN)}};
  auto st = make_optim_state(p);
  try {
    adamw_step(p, g, st, hp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteGradient);
  }
  EXPECT_EQ(p[0].second, DenseMatrix(2, 2, 1.0));
  EXPECT_EQ(st.step, 0u);
}

TEST(OptimHyper, Validation) {
  OptimHyper hp;
  EXPECT_NO_THROW(validate(hp));
  hp.beta2 = 1.0;
  EXPECT_THROW(validate(hp), Error);
  hp = {};
  hp.iterations = 0;
  EXPECT_THROW(validate(hp), Error);
  hp = {};
  hp.lr = 0.0;
  EXPECT_THROW(validate(hp), Error);
}

TEST(TrainApprox, ZeroTarget) {
  OptimHyper hp;
  hp.iterations = 5;
  for (AdapterKind kind : kAllAdapterKinds) {
    const auto r = train_approx(default_config(kind, 12, 8), DenseMatrix(12, 8), hp, 1);
    ASSERT_EQ(r.trace.loss.size(), 6u);
    EXPECT_EQ(r.trace.loss.front(), 0.0);
    EXPECT_LE(r.trace.loss.back(), r.trace.loss.front());
  }
}

TEST(TrainApprox, DeterministicAndImproves) {
  OptimHyper hp;
  hp.iterations = 20;
  const auto target = gen_normal(40, 30, 2);
  const auto copy = target;
  for (AdapterKind kind : kAllAdapterKinds) {
    const auto c = match_budget(kind, 40, 30, num_params(default_config(AdapterKind::kKRAdapter, 40, 30)));
    const auto a = train_approx(c, target, hp, 5);
    const auto b = train_approx(c, target, hp, 5);
    EXPECT_EQ(a.trace.loss, b.trace.loss) << to_string(kind);
    EXPECT_LT(a.trace.loss.back(), a.trace.loss.front()) << to_string(kind);
    for (double x : a.trace.loss) EXPECT_TRUE(std::isfinite(x) && x >= 0.0);
  }
  EXPECT_TRUE(bitwise_equal(target, copy));
}

TEST(TrainApprox, FullSizeKRAdapterImproves) {
  const auto target = gen_normal(1024, 768, 0);
  const auto r = train_approx(default_config(AdapterKind::kKRAdapter, 1024, 768), target, OptimHyper{}, 0);
  ASSERT_EQ(r.trace.loss.size(), 101u);
  EXPECT_LT(r.trace.loss[100], r.trace.loss[0]);
}

TEST(TrainApprox, ShapeMismatch) {
  EXPECT_THROW(train_approx(default_config(AdapterKind::kLoRA, 12, 8), DenseMatrix(8, 12), {}, 0), Error);
}
