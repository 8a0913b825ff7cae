#pragma once

#include "oplab/algos/agent.hpp"
#include "oplab/algos/epoch_cost.hpp"
#include "oplab/policy/gaussian_policy.hpp"

namespace oplab::algos {

// Soft actor-critic with clipped twin critics and a learned temperature.
// The constrained variant adds one or two cost critics regressed to the
// plain (entropy-free) cost backup and steers the policy by
// min Q_r - beta * min Q_c with beta learned from recent episode costs.
class SacAgent : public Agent {
 public:
  SacAgent(const AgentConfig& cfg, const envs::EnvSpec& env_spec,
           std::uint64_t master_seed, bool constrained);

  Algorithm algorithm() const override {
    return constrained_ ? Algorithm::kSacConstrained : Algorithm::kSac;
  }

  Eigen::VectorXd act_rollout(const Eigen::VectorXd& obs,
                              RngStream& rng) override;
  Eigen::VectorXd act_deterministic(const Eigen::VectorXd& obs) override;
  void update(const replay::ReplayBuffer& buffer, RngStream& buffer_rng,
              long env_step) override;
  void on_episode_end(long env_step, double episode_cost) override;
  std::optional<double> alpha() const override {
    return temperature_.alpha();
  }
  std::optional<double> beta() const override {
    if (constrained_) return beta_;
    return std::nullopt;
  }
  TdResiduals td_residuals(const replay::ValidationSet& val,
                           RngStream& rng) const override;
  double q_policy_value(const Eigen::VectorXd& s,
                        const Eigen::VectorXd& a) const override;

  policy::GaussianPolicy& gaussian_policy() { return policy_; }

 protected:
  void reset_networks(RngStream& rng) override;
  std::vector<std::pair<std::string, const diffcore::ParamStore*>>
  named_stores() const override;
  std::vector<std::pair<std::string, diffcore::ParamStore*>> named_stores_mut()
      override;
  void save_extra(std::ostream& out) const override;
  void load_extra(std::istream& in) override;

  bool constrained_;
  policy::GaussianPolicy policy_;
  diffcore::MLPSpec q_spec_;
  diffcore::ParamStore q1_, q2_, q1_targ_, q2_targ_;
  std::vector<diffcore::ParamStore> qc_, qc_targ_;  // n_cost_critics entries
  policy::Temperature temperature_;
  double beta_ = 0.0;
  EpochCostLog epoch_costs_;
};

}  // namespace oplab::algos
