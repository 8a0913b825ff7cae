#pragma once

#include "oplab/diffcore/mlp.hpp"

namespace oplab::diffcore {

// First-order adaptive-moment update with bias correction.
struct OptimizerConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One in-place update over every entry of the store. Increments opt_t and
// zeroes the gradients afterwards; one batch per step, no accumulation.
// Throws NumericError naming the parameter if any gradient is non-finite.
void optimizer_step(ParamStore& store, const OptimizerConfig& cfg);

// target <- rho * target + (1 - rho) * main, elementwise.
void polyak_update(ParamStore& target, const ParamStore& main, double rho);

// Hard copy of parameter values (targets re-synced after a reset).
void copy_params(ParamStore& target, const ParamStore& main);

}  // namespace oplab::diffcore
