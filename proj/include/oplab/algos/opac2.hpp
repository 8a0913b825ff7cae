#pragma once

#include "oplab/algos/agent.hpp"
#include "oplab/algos/epoch_cost.hpp"
#include "oplab/policy/gaussian_policy.hpp"

namespace oplab::algos {

// Off-policy actor-critic with squashed actions, a single critic per reward
// stream, a state-value baseline with a slow target, normalized advantages
// and an adaptive entropy bonus. The update order within one gradient step
// is: critic regression to r + gamma(1-d) V_targ(s'), value regression to
// the fresh critic at a policy action, advantage normalization, the policy
// step, the temperature step, then the target average.
class Opac2Agent : public Agent {
 public:
  Opac2Agent(const AgentConfig& cfg, const envs::EnvSpec& env_spec,
             std::uint64_t master_seed);

  Algorithm algorithm() const override { return Algorithm::kOpac2; }

  Eigen::VectorXd act_rollout(const Eigen::VectorXd& obs,
                              RngStream& rng) override;
  Eigen::VectorXd act_deterministic(const Eigen::VectorXd& obs) override;
  void update(const replay::ReplayBuffer& buffer, RngStream& buffer_rng,
              long env_step) override;
  std::optional<double> alpha() const override {
    return temperature_.alpha();
  }
  TdResiduals td_residuals(const replay::ValidationSet& val,
                           RngStream& rng) const override;
  double q_policy_value(const Eigen::VectorXd& s,
                        const Eigen::VectorXd& a) const override;

  policy::GaussianPolicy& gaussian_policy() { return policy_; }
  const diffcore::ParamStore& q_store() const { return q_; }
  const diffcore::ParamStore& v_store() const { return v_; }
  const diffcore::ParamStore& v_target_store() const { return v_targ_; }

 protected:
  void reset_networks(RngStream& rng) override;
  std::vector<std::pair<std::string, const diffcore::ParamStore*>>
  named_stores() const override;
  std::vector<std::pair<std::string, diffcore::ParamStore*>> named_stores_mut()
      override;

  void update_from_batches(const replay::Batch& q_batch,
                           const replay::Batch& v_batch,
                           const replay::Batch& pi_batch);

  policy::GaussianPolicy policy_;
  diffcore::MLPSpec q_spec_;
  diffcore::MLPSpec v_spec_;
  diffcore::ParamStore q_;
  diffcore::ParamStore v_;
  diffcore::ParamStore v_targ_;
  policy::Temperature temperature_;
};

// Constrained variant: separate reward/cost critics and value baselines plus
// a learned penalty weight beta driven by recent-epoch episode costs toward
// the cost limit. With beta pinned at zero and a cost-free environment the
// update sequence reduces exactly to the unconstrained agent.
class Copac2Agent : public Agent {
 public:
  Copac2Agent(const AgentConfig& cfg, const envs::EnvSpec& env_spec,
              std::uint64_t master_seed);

  Algorithm algorithm() const override { return Algorithm::kCopac2; }

  Eigen::VectorXd act_rollout(const Eigen::VectorXd& obs,
                              RngStream& rng) override;
  Eigen::VectorXd act_deterministic(const Eigen::VectorXd& obs) override;
  void update(const replay::ReplayBuffer& buffer, RngStream& buffer_rng,
              long env_step) override;
  void on_episode_end(long env_step, double episode_cost) override;
  std::optional<double> alpha() const override {
    return temperature_.alpha();
  }
  std::optional<double> beta() const override { return beta_; }
  TdResiduals td_residuals(const replay::ValidationSet& val,
                           RngStream& rng) const override;
  double q_policy_value(const Eigen::VectorXd& s,
                        const Eigen::VectorXd& a) const override;

  policy::GaussianPolicy& gaussian_policy() { return policy_; }
  const diffcore::ParamStore& q_reward_store() const { return q_r_; }
  const diffcore::ParamStore& v_reward_store() const { return v_r_; }

 protected:
  void reset_networks(RngStream& rng) override;
  std::vector<std::pair<std::string, const diffcore::ParamStore*>>
  named_stores() const override;
  std::vector<std::pair<std::string, diffcore::ParamStore*>> named_stores_mut()
      override;
  void save_extra(std::ostream& out) const override;
  void load_extra(std::istream& in) override;

  policy::GaussianPolicy policy_;
  diffcore::MLPSpec q_spec_;
  diffcore::MLPSpec v_spec_;
  diffcore::ParamStore q_r_, q_c_;
  diffcore::ParamStore v_r_, v_c_;
  diffcore::ParamStore v_r_targ_, v_c_targ_;
  policy::Temperature temperature_;
  double beta_ = 0.0;
  EpochCostLog epoch_costs_;
};

}  // namespace oplab::algos
