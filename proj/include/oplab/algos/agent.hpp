#pragma once

#include "oplab/common/rng.hpp"
#include "oplab/diffcore/optimizer.hpp"
#include "oplab/envs/env.hpp"
#include "oplab/replay/replay_buffer.hpp"
#include "oplab/replay/validation.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace oplab::algos {

enum class Algorithm {
  kOpac2,
  kCopac2,
  kSac,
  kTd3,
  kSacConstrained,
  kTd3Constrained,
};

enum class EntropyMode { kBonus, kMaxEntropy, kNone };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm a);
bool is_constrained(Algorithm a);

struct AgentConfig {
  double gamma = 0.99;
  double rho = 0.995;
  int batch_size = 256;
  int target_update_interval = 1;
  long initial_exploration_steps = 10000;
  int gradient_steps = 1;  // G

  double lr = 1e-4;        // lambda_theta = lambda_phi = lambda_psi
  double lr_alpha = 5e-4;  // on log alpha
  double lr_beta = 5e-6;

  EntropyMode entropy_mode = EntropyMode::kBonus;
  std::optional<long> reset_interval;
  int n_cost_critics = 2;  // constrained SAC/TD3 only
  bool independent_batches = false;

  std::vector<int> hidden{256, 256};
  std::optional<diffcore::Activation> activation;  // per-algorithm default
  std::optional<bool> state_dependent_std;         // per-algorithm default
  double alpha_init = 1.0;
  double beta_init = 0.0;
  std::optional<double> target_entropy;  // default -act_dim

  double cost_limit = 0.0;  // M, constrained algorithms
  long beta_epoch_len = 0;  // env steps per cost epoch; 0: eval interval

  // TD3 mechanism constants (from the original method)
  int policy_delay = 2;
  double sigma_smooth = 0.2;
  double c_smooth = 0.5;
  double sigma_expl = 0.1;

  void validate() const;
};

// Bellman residuals on held-out transitions, reward and (for constrained
// agents) cost streams. Residuals from twin critics are appended per
// transition in critic order.
struct TdResiduals {
  std::vector<double> reward;
  std::vector<double> cost;
};

class Agent {
 public:
  Agent(const AgentConfig& cfg, const envs::EnvSpec& env_spec,
        std::uint64_t master_seed);
  virtual ~Agent() = default;

  const AgentConfig& config() const { return cfg_; }
  const envs::EnvSpec& env_spec() const { return env_spec_; }
  virtual Algorithm algorithm() const = 0;

  // Uniform exploration for the first initial_exploration_steps, then the
  // behavior policy; draws from the agent's own streams.
  Eigen::VectorXd act_training(const Eigen::VectorXd& obs, long env_step);

  // Behavior policy with caller-provided randomness (held-out rollouts).
  virtual Eigen::VectorXd act_rollout(const Eigen::VectorXd& obs,
                                      RngStream& rng) = 0;
  virtual Eigen::VectorXd act_deterministic(const Eigen::VectorXd& obs) = 0;

  // One gradient step; samples its own minibatch(es) from the buffer.
  virtual void update(const replay::ReplayBuffer& buffer, RngStream& buffer_rng,
                      long env_step) = 0;

  // Re-initializes every network and optimizer at multiples of
  // reset_interval, keeping the temperature, any penalty weight, and the
  // caller's replay buffer.
  void maybe_reset(long env_step);

  virtual void on_episode_end(long env_step, double episode_cost);

  virtual std::optional<double> alpha() const { return std::nullopt; }
  virtual std::optional<double> beta() const { return std::nullopt; }

  virtual TdResiduals td_residuals(const replay::ValidationSet& val,
                                   RngStream& rng) const = 0;

  // The critic value the algorithm steers its policy by (single Q, min of
  // twins, or the reward critic for constrained agents).
  virtual double q_policy_value(const Eigen::VectorXd& s,
                                const Eigen::VectorXd& a) const = 0;

  replay::RolloutPolicy rollout_policy();

  void save(std::ostream& out) const;
  void load(std::istream& in);
  void save_file(const std::string& path) const;
  void load_file(const std::string& path);

 protected:
  virtual void reset_networks(RngStream& rng) = 0;
  // (name, store) pairs in a fixed order; used by save/load and tests.
  virtual std::vector<std::pair<std::string, const diffcore::ParamStore*>>
  named_stores() const = 0;
  virtual std::vector<std::pair<std::string, diffcore::ParamStore*>>
  named_stores_mut() = 0;
  virtual void save_extra(std::ostream& out) const;
  virtual void load_extra(std::istream& in);

  AgentConfig cfg_;
  envs::EnvSpec env_spec_;
  diffcore::OptimizerConfig opt_;
  RngStream explore_rng_;
  RngStream policy_rng_;
  RngStream update_noise_rng_;
  RngStream reset_rng_;
  long update_count_ = 0;
};

std::unique_ptr<Agent> make_agent(Algorithm algorithm, const AgentConfig& cfg,
                                  const envs::EnvSpec& env_spec,
                                  std::uint64_t master_seed);

}  // namespace oplab::algos
