#include "oplab/algos/agent.hpp"

#include "oplab/algos/losses.hpp"
#include "oplab/algos/opac2.hpp"
#include "oplab/algos/sac.hpp"
#include "oplab/algos/td3.hpp"
#include "oplab/diffcore/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace oplab::algos {

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "opac2") return Algorithm::kOpac2;
  if (name == "copac2") return Algorithm::kCopac2;
  if (name == "sac") return Algorithm::kSac;
  if (name == "td3") return Algorithm::kTd3;
  if (name == "sac_constrained") return Algorithm::kSacConstrained;
  if (name == "td3_constrained") return Algorithm::kTd3Constrained;
  throw std::invalid_argument("unknown algorithm: " + name);
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kOpac2: return "opac2";
    case Algorithm::kCopac2: return "copac2";
    case Algorithm::kSac: return "sac";
    case Algorithm::kTd3: return "td3";
    case Algorithm::kSacConstrained: return "sac_constrained";
    case Algorithm::kTd3Constrained: return "td3_constrained";
  }
  return "?";
}

bool is_constrained(Algorithm a) {
  return a == Algorithm::kCopac2 || a == Algorithm::kSacConstrained ||
         a == Algorithm::kTd3Constrained;
}

void AgentConfig::validate() const {
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("gamma must be in [0, 1)");
  if (rho <= 0.0 || rho >= 1.0)
    throw std::invalid_argument("rho must be in (0, 1)");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (lr <= 0.0 || lr_alpha <= 0.0 || lr_beta < 0.0)
    throw std::invalid_argument("learning rates must be positive");
  if (n_cost_critics != 1 && n_cost_critics != 2)
    throw std::invalid_argument("n_cost_critics must be 1 or 2");
  if (gradient_steps < 0)
    throw std::invalid_argument("gradient_steps must be >= 0");
  if (reset_interval && *reset_interval <= 0)
    throw std::invalid_argument("reset_interval must be positive");
  if (beta_epoch_len < 0)
    throw std::invalid_argument("beta_epoch_len must be >= 0");
}

Agent::Agent(const AgentConfig& cfg, const envs::EnvSpec& env_spec,
             std::uint64_t master_seed)
    : cfg_(cfg),
      env_spec_(env_spec),
      explore_rng_(master_seed, stream_id::kExplore),
      policy_rng_(master_seed, stream_id::kPolicyRollout),
      update_noise_rng_(master_seed, stream_id::kUpdateNoise),
      reset_rng_(master_seed, stream_id::kReset) {
  cfg_.validate();
  opt_.learning_rate = cfg_.lr;
}

Eigen::VectorXd Agent::act_training(const Eigen::VectorXd& obs,
                                    long env_step) {
  if (env_step < cfg_.initial_exploration_steps)
    return explore_rng_.uniform_vector(env_spec_.act_dim, -1.0, 1.0);
  return act_rollout(obs, policy_rng_);
}

void Agent::maybe_reset(long env_step) {
  if (!cfg_.reset_interval) return;
  if (env_step == 0 || env_step % *cfg_.reset_interval != 0) return;
  reset_networks(reset_rng_);
}

void Agent::on_episode_end(long, double) {}

replay::RolloutPolicy Agent::rollout_policy() {
  return [this](const Eigen::VectorXd& obs, RngStream& rng) {
    return act_rollout(obs, rng);
  };
}

void Agent::save(std::ostream& out) const {
  const auto stores = named_stores();
  const std::uint32_t count = static_cast<std::uint32_t>(stores.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, store] : stores) {
    const std::uint32_t len = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(name.data(), len);
    diffcore::save_store(out, *store);
  }
  out.write(reinterpret_cast<const char*>(&update_count_),
            sizeof(update_count_));
  save_extra(out);
}

void Agent::load(std::istream& in) {
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  auto stores = named_stores_mut();
  if (count != stores.size())
    throw std::runtime_error("agent checkpoint: store count mismatch");
  for (auto& [name, store] : stores) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string got(len, '\0');
    in.read(got.data(), len);
    if (got != name)
      throw std::runtime_error("agent checkpoint: expected store " + name +
                               ", found " + got);
    *store = diffcore::load_store(in);
  }
  in.read(reinterpret_cast<char*>(&update_count_), sizeof(update_count_));
  load_extra(in);
  if (!in) throw std::runtime_error("agent checkpoint: truncated");
}

void Agent::save_extra(std::ostream&) const {}
void Agent::load_extra(std::istream&) {}

void Agent::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  save(out);
}

void Agent::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  load(in);
}

std::unique_ptr<Agent> make_agent(Algorithm algorithm, const AgentConfig& cfg,
                                  const envs::EnvSpec& env_spec,
                                  std::uint64_t master_seed) {
  switch (algorithm) {
    case Algorithm::kOpac2:
      return std::make_unique<Opac2Agent>(cfg, env_spec, master_seed);
    case Algorithm::kCopac2:
      return std::make_unique<Copac2Agent>(cfg, env_spec, master_seed);
    case Algorithm::kSac:
      return std::make_unique<SacAgent>(cfg, env_spec, master_seed, false);
    case Algorithm::kSacConstrained:
      return std::make_unique<SacAgent>(cfg, env_spec, master_seed, true);
    case Algorithm::kTd3:
      return std::make_unique<Td3Agent>(cfg, env_spec, master_seed, false);
    case Algorithm::kTd3Constrained:
      return std::make_unique<Td3Agent>(cfg, env_spec, master_seed, true);
  }
  throw std::invalid_argument("make_agent: bad algorithm");
}

Eigen::VectorXd normalize_advantages(const Eigen::VectorXd& a) {
  if (a.size() == 1) return Eigen::VectorXd::Zero(1);
  const double mean = a.mean();
  const double var = (a.array() - mean).square().mean();  // population
  const double std = std::sqrt(var);
  return (a.array() - mean) / (std + 1e-8);
}

}  // namespace oplab::algos
