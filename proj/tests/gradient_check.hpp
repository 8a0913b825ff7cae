#pragma once

#include "oplab/diffcore/graph.hpp"
#include "oplab/diffcore/mlp.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace oplab::testing {

// Rebuilds a scalar loss graph from scratch; must read parameter values from
// the registered stores so perturbations are visible on re-evaluation. Any
// sampled noise has to be drawn once outside and captured as a constant
// (common random numbers).
using LossBuilder = std::function<diffcore::Var(diffcore::Graph&)>;

inline double eval_loss(const LossBuilder& build) {
  diffcore::Graph g;
  diffcore::Var loss = build(g);
  return g.value(loss)(0, 0);
}

// Central finite differences against the tape gradients over every entry of
// every store. Returns the worst relative error, with a small floor on the
// denominator so near-zero gradients compare by absolute error.
inline double max_grad_rel_error(
    const std::vector<diffcore::ParamStore*>& stores, const LossBuilder& build,
    double h = 1e-5) {
  for (auto* s : stores) s->zero_grads();
  {
    diffcore::Graph g;
    diffcore::Var loss = build(g);
    g.backward(loss, "gradient check");
  }
  std::vector<std::map<std::string, diffcore::Matrix>> analytic(stores.size());
  for (std::size_t i = 0; i < stores.size(); ++i)
    for (auto& [name, e] : stores[i]->entries) analytic[i][name] = e.grad;

  double worst = 0.0;
  for (std::size_t i = 0; i < stores.size(); ++i) {
    for (auto& [name, e] : stores[i]->entries) {
      for (Eigen::Index r = 0; r < e.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < e.value.cols(); ++c) {
          const double saved = e.value(r, c);
          e.value(r, c) = saved + h;
          const double up = eval_loss(build);
          e.value(r, c) = saved - h;
          const double down = eval_loss(build);
          e.value(r, c) = saved;
          const double fd = (up - down) / (2.0 * h);
          const double an = analytic[i][name](r, c);
          const double rel = std::abs(fd - an) /
                             std::max({std::abs(fd), std::abs(an), 1e-3});
          worst = std::max(worst, rel);
        }
      }
    }
  }
  for (auto* s : stores) s->zero_grads();
  return worst;
}

}  // namespace oplab::testing
