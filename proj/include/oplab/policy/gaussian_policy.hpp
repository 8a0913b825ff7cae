#pragma once

#include "oplab/common/rng.hpp"
#include "oplab/diffcore/mlp.hpp"
#include "oplab/diffcore/optimizer.hpp"

#include <Eigen/Core>

namespace oplab::policy {

using diffcore::Graph;
using diffcore::Matrix;
using diffcore::MLPSpec;
using diffcore::ParamStore;
using diffcore::Var;

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

// Distribution parameters for a batch of states; log_std is already clamped.
struct PolicyHead {
  Matrix mean;     // B x act_dim
  Matrix log_std;  // B x act_dim
};

// One squashed draw: a = tanh(u), u = mean + exp(log_std) * xi.
struct SquashedSample {
  Matrix pre_squash;  // u
  Matrix action;      // tanh(u), strictly inside (-1, 1)
  Eigen::VectorXd log_prob;
};

struct PolicyConfig {
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<int> hidden{256, 256};
  diffcore::Activation activation = diffcore::Activation::kTanh;
  // When false the control variance is a free parameter, independent of
  // state; when true the network outputs it per state.
  bool state_dependent_std = false;
  double log_std_init = 0.0;
};

// Diagonal-Gaussian policy squashed through tanh. The network outputs the
// mean (and, when state-dependent, the log standard deviation); the
// change-of-variables correction keeps densities exact on the squashed
// action.
class GaussianPolicy {
 public:
  GaussianPolicy(const PolicyConfig& cfg, RngStream& init_rng);

  const PolicyConfig& config() const { return cfg_; }
  const MLPSpec& net_spec() const { return net_spec_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

  // --- plain (rollout / diagnostics) path ---

  PolicyHead head(const Matrix& obs) const;

  // u drawn with the given stream; reparameterization is a property of the
  // tape path, the numerical draw is identical either way.
  SquashedSample sample(const PolicyHead& head, RngStream& rng) const;

  // Sample with caller-provided noise (tests pin xi).
  SquashedSample sample_with_noise(const PolicyHead& head,
                                   const Matrix& xi) const;

  // Joint log density of the squashed action with pre-squash value u.
  Eigen::VectorXd log_prob(const PolicyHead& head, const Matrix& u) const;

  // tanh(mean): the distribution mode, used for deterministic control.
  Matrix deterministic_action(const Matrix& obs) const;

  // --- tape path ---

  struct HeadVars {
    Var mean;
    Var log_std;
  };

  // Builds the head over `obs`; with bind_params the policy parameters are
  // differentiable leaves.
  HeadVars head_on(Graph& g, Var obs, bool bind_params = true);

  // u = mean + exp(log_std) * xi with gradients flowing into the head.
  Var reparam_pre_squash(Graph& g, const HeadVars& head, const Matrix& xi);

  // Row-wise log pi(a|s) for pre-squash values u (a Var, so u may be either
  // a reparameterized path or a detached constant).
  Var log_prob_on(Graph& g, const HeadVars& head, Var u);

  // Re-draws network weights and the free log_std, zeroes optimizer state.
  void reset(RngStream& rng);

 private:
  PolicyConfig cfg_;
  MLPSpec net_spec_;
  ParamStore store_;
};

// Row-wise log of the tanh Jacobian determinant, 2*(ln 2 - u - softplus(-2u))
// summed over action dims; equals log(1 - tanh(u)^2) without overflow.
Var tanh_log_jacobian(Graph& g, Var u);
Eigen::VectorXd tanh_log_jacobian(const Matrix& u);

// Learned entropy weight alpha = exp(log_alpha), optimized toward a target
// entropy with its own moment state.
class Temperature {
 public:
  Temperature(double alpha_init, double target_entropy, double learning_rate);

  double alpha() const { return std::exp(log_alpha()); }
  double log_alpha() const { return store_.at("log_alpha").value(0, 0); }
  double target_entropy() const { return target_entropy_; }

  // One step on log_alpha against mean(-alpha * (log_prob + target)).
  void update(const Eigen::VectorXd& batch_log_probs);

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

 private:
  ParamStore store_;
  double target_entropy_;
  diffcore::OptimizerConfig opt_;
};

}  // namespace oplab::policy
