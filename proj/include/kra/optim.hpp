#pragma once

#include <cstdint>
#include <vector>

#include "kra/adapters.hpp"
#include "kra/matrix.hpp"

namespace kra {

struct OptimHyper {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double epsilon = 1e-8;
  std::size_t iterations = 100;

  friend bool operator==(const OptimHyper&, const OptimHyper&) = default;
};

// Throws InvalidConfig when a field is out of range.
void validate(const OptimHyper& hp);

struct OptimState {
  std::vector<DenseMatrix> m;
  std::vector<DenseMatrix> v;
  std::uint64_t step = 0;
};

// Zeroed moments shaped like `params`.
OptimState make_optim_state(const NamedMatrices& params);

struct TrainTrace {
  // Index 0 is the loss before the first update.
  std::vector<double> loss;
};

struct LossAndGrad {
  double loss = 0.0;
  DenseMatrix grad;
};

// Mean squared error over all entries and its gradient w.r.t. `estimate`.
LossAndGrad mse_loss(const DenseMatrix& estimate, const DenseMatrix& target);

// One decoupled-weight-decay Adam update. Throws NonFiniteGradient before
// touching any parameter if a gradient entry is NaN or Inf.
void adamw_step(NamedMatrices& params, const NamedMatrices& grads, OptimState& state,
                const OptimHyper& hp);

struct TrainResult {
  AdapterState state;
  TrainTrace trace;
};

TrainResult train_approx(const AdapterConfig& config, const DenseMatrix& target,
                         const OptimHyper& hp, std::uint64_t seed);

}  // namespace kra
