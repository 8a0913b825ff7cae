#pragma once

#include "oplab/algos/agent.hpp"
#include "oplab/algos/epoch_cost.hpp"

namespace oplab::algos {

// Twin delayed deterministic policy gradient: smoothed target actions in the
// critic backup, delayed actor steps on Q1, Gaussian exploration noise. The
// constrained variant mirrors the SAC one (cost critics, learned beta).
class Td3Agent : public Agent {
 public:
  Td3Agent(const AgentConfig& cfg, const envs::EnvSpec& env_spec,
           std::uint64_t master_seed, bool constrained);

  Algorithm algorithm() const override {
    return constrained_ ? Algorithm::kTd3Constrained : Algorithm::kTd3;
  }

  Eigen::VectorXd act_rollout(const Eigen::VectorXd& obs,
                              RngStream& rng) override;
  Eigen::VectorXd act_deterministic(const Eigen::VectorXd& obs) override;
  void update(const replay::ReplayBuffer& buffer, RngStream& buffer_rng,
              long env_step) override;
  void on_episode_end(long env_step, double episode_cost) override;
  std::optional<double> beta() const override {
    if (constrained_) return beta_;
    return std::nullopt;
  }
  TdResiduals td_residuals(const replay::ValidationSet& val,
                           RngStream& rng) const override;
  double q_policy_value(const Eigen::VectorXd& s,
                        const Eigen::VectorXd& a) const override;

  long critic_steps() const { return critic_steps_; }
  long actor_steps() const { return actor_steps_; }

 protected:
  void reset_networks(RngStream& rng) override;
  std::vector<std::pair<std::string, const diffcore::ParamStore*>>
  named_stores() const override;
  std::vector<std::pair<std::string, diffcore::ParamStore*>> named_stores_mut()
      override;
  void save_extra(std::ostream& out) const override;
  void load_extra(std::istream& in) override;

  Eigen::MatrixXd target_actions(const Eigen::MatrixXd& s_next,
                                 RngStream& rng) const;

  bool constrained_;
  diffcore::MLPSpec actor_spec_;
  diffcore::MLPSpec q_spec_;
  diffcore::ParamStore actor_, actor_targ_;
  diffcore::ParamStore q1_, q2_, q1_targ_, q2_targ_;
  std::vector<diffcore::ParamStore> qc_, qc_targ_;
  double beta_ = 0.0;
  EpochCostLog epoch_costs_;
  long critic_steps_ = 0;
  long actor_steps_ = 0;
};

}  // namespace oplab::algos
