#include "oplab/diffcore/optimizer.hpp"

#include <cmath>

namespace oplab::diffcore {

void optimizer_step(ParamStore& store, const OptimizerConfig& cfg) {
  for (const auto& [name, e] : store.entries) {
    if (!e.grad.allFinite())
      throw NumericError("non-finite gradient for parameter " + name);
  }
  store.opt_t += 1;
  const double t = static_cast<double>(store.opt_t);
  const double m_corr = 1.0 - std::pow(cfg.beta1, t);
  const double v_corr = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, e] : store.entries) {
    e.m = cfg.beta1 * e.m + (1.0 - cfg.beta1) * e.grad;
    e.v = cfg.beta2 * e.v + (1.0 - cfg.beta2) * e.grad.cwiseProduct(e.grad);
    e.value.array() -= cfg.learning_rate * (e.m.array() / m_corr) /
                       ((e.v.array() / v_corr).sqrt() + cfg.epsilon);
    e.grad.setZero();
  }
}

void polyak_update(ParamStore& target, const ParamStore& main, double rho) {
  for (auto& [name, e] : target.entries) {
    const auto& src = main.at(name).value;
    if (src.rows() != e.value.rows() || src.cols() != e.value.cols())
      throw DimensionError("polyak_update: shape mismatch for " + name);
    e.value = rho * e.value + (1.0 - rho) * src;
  }
}

void copy_params(ParamStore& target, const ParamStore& main) {
  for (auto& [name, e] : target.entries) e.value = main.at(name).value;
}

}  // namespace oplab::diffcore
