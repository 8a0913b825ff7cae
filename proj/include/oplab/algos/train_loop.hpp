#pragma once

#include "oplab/algos/agent.hpp"
#include "oplab/envs/env.hpp"
#include "oplab/replay/replay_buffer.hpp"

namespace oplab::algos {

// Rolling interaction state for one run.
struct LoopState {
  Eigen::VectorXd obs;
  double episode_reward = 0.0;
  double episode_cost = 0.0;
  double episode_incentive = 0.0;
  long env_step = 0;  // completed environment steps
};

struct StepOutcome {
  bool episode_done = false;
  double reward = 0.0;
  double cost = 0.0;
  double incentive = 0.0;
};

inline void loop_init(LoopState& state, envs::Env& env, RngStream& env_rng) {
  state.obs = env.reset(env_rng);
  state.episode_reward = state.episode_cost = state.episode_incentive = 0.0;
}

// One environment step pushed to the buffer followed by G gradient steps
// (skipped during initial exploration or while the buffer is smaller than a
// batch). Episode ends feed the agent's cost accounting and reset the env.
StepOutcome train_step(Agent& agent, envs::Env& env,
                       replay::ReplayBuffer& buffer, LoopState& state,
                       RngStream& env_rng, RngStream& buffer_rng);

}  // namespace oplab::algos
