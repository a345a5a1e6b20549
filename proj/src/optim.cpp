#include "kra/optim.hpp"

#include <cmath>
#include <string>

#include "kra/error.hpp"
#include "kra/linalg.hpp"

namespace kra {

void validate(const OptimHyper& hp) {
  auto bad = [](const std::string& why) { fail(ErrorCode::kInvalidConfig, "optimizer: " + why); };
  if (!(hp.lr > 0.0) || !std::isfinite(hp.lr)) bad("lr must be positive");
  if (!(hp.beta1 >= 0.0 && hp.beta1 < 1.0)) bad("beta1 must lie in [0, 1)");
  if (!(hp.beta2 >= 0.0 && hp.beta2 < 1.0)) bad("beta2 must lie in [0, 1)");
  if (!(hp.weight_decay >= 0.0) || !std::isfinite(hp.weight_decay)) bad("weight decay must be >= 0");
  if (!(hp.epsilon >= 0.0) || !std::isfinite(hp.epsilon)) bad("epsilon must be >= 0");
  if (hp.iterations < 1) bad("iterations must be >= 1");
}

OptimState make_optim_state(const NamedMatrices& params) {
  OptimState s;
  for (const auto& [name, p] : params) {
    s.m.emplace_back(p.rows(), p.cols());
    s.v.emplace_back(p.rows(), p.cols());
  }
  return s;
}

LossAndGrad mse_loss(const DenseMatrix& estimate, const DenseMatrix& target) {
  require_same_shape(estimate, target, "mse_loss");
  LossAndGrad out;
  out.grad = DenseMatrix(estimate.rows(), estimate.cols());
  const auto e = estimate.data();
  const auto t = target.data();
  auto g = out.grad.data();
  const double n = static_cast<double>(e.size());
  const double scale = 2.0 / n;
  double sum = 0.0;
#pragma omp simd reduction(+ : sum)
  for (std::size_t k = 0; k < e.size(); ++k) {
    const double d = e[k] - t[k];
    sum += d * d;
    g[k] = scale * d;
  }
  out.loss = sum / n;
  return out;
}

void adamw_step(NamedMatrices& params, const NamedMatrices& grads, OptimState& state,
                const OptimHyper& hp) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    fail(ErrorCode::kShapeMismatch, "adamw_step: parameter, gradient and moment lists differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i].second, grads[i].second, "adamw_step");
    if (!grads[i].second.all_finite()) {
      fail(ErrorCode::kNonFiniteGradient, "non-finite gradient for " + params[i].first);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  const double decay = hp.lr * hp.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].second.data();
    const auto g = grads[i].second.data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = hp.beta1 * m[k] + (1.0 - hp.beta1) * g[k];
      v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      const double denom = std::sqrt(v_hat) + hp.epsilon;
      const double step = denom > 0.0 ? m_hat / denom : 0.0;
      p[k] = p[k] - hp.lr * step - decay * p[k];
    }
  }
}

TrainResult train_approx(const AdapterConfig& config, const DenseMatrix& target,
                         const OptimHyper& hp, std::uint64_t seed) {
  validate(hp);
  if (target.rows() != config.d_out || target.cols() != config.d_in) {
    fail(ErrorCode::kShapeMismatch, "train_approx: target must be " + std::to_string(config.d_out) +
                                        "x" + std::to_string(config.d_in));
  }
  TrainResult r{init(config, seed), {}};
  OptimState opt = make_optim_state(r.state.trainable);
  r.trace.loss.reserve(hp.iterations + 1);
  for (std::size_t it = 0; it < hp.iterations; ++it) {
    LossAndGrad lg = mse_loss(delta(r.state), target);
    r.trace.loss.push_back(lg.loss);
    const ParamGrads grads = backward_delta(r.state, lg.grad);
    adamw_step(r.state.trainable, grads, opt, hp);
  }
  r.trace.loss.push_back(mse_loss(delta(r.state), target).loss);
  return r;
}

}  // namespace kra
