#pragma once

#include "oplab/algos/agent.hpp"
#include "oplab/envs/nav.hpp"
#include "oplab/envs/pendulum.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oplab::harness {

enum class EnvKind { kNavMixed, kPendulum };

EnvKind env_from_string(const std::string& name);
std::string to_string(EnvKind e);

// Full description of one experiment. Constrained algorithms require a
// positive cost limit; unconstrained ones use the penalty weight.
struct ExperimentConfig {
  algos::Algorithm algorithm = algos::Algorithm::kOpac2;
  EnvKind env = EnvKind::kNavMixed;
  double penalty_weight = 0.0;
  std::optional<double> cost_limit;

  long total_env_steps = 150000;
  long eval_interval = 10000;
  int eval_episodes = 5;
  long buffer_capacity = 1000000;
  std::optional<long> checkpoint_interval;
  long early_step = 0;  // 0: use reset_interval, else 30k

  algos::AgentConfig agent;
  envs::NavConfig nav;
  envs::PendulumConfig pendulum;

  void validate() const;
  long resolved_early_step() const;
};

// Flat key-value text: one `key = value` per line, `#` starts a comment,
// blank lines ignored. Unknown keys are an error. Lists are comma-separated
// (hidden = 64,64); optional values use 0 or `off` to disable and `default`
// / `auto` where noted in the README.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Applies `key=value` override strings on top of a parsed config.
void apply_overrides(ExperimentConfig& cfg,
                     const std::vector<std::string>& overrides);

// Round-trippable text form (used inside checkpoints and resolved.cfg).
std::string to_text(const ExperimentConfig& cfg);

}  // namespace oplab::harness
