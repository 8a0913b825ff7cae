#include "oplab/algos/train_loop.hpp"

namespace oplab::algos {

StepOutcome train_step(Agent& agent, envs::Env& env,
                       replay::ReplayBuffer& buffer, LoopState& state,
                       RngStream& env_rng, RngStream& buffer_rng) {
  const AgentConfig& cfg = agent.config();

  const Eigen::VectorXd action = agent.act_training(state.obs, state.env_step);
  const envs::StepResult sr = env.step(action);

  replay::Transition t;
  t.s = state.obs;
  t.a = action;
  t.r = sr.reward;
  t.c = sr.cost;
  t.s_next = sr.obs;
  t.d = false;  // fixed-horizon truncation, keep bootstrapping
  buffer.push(std::move(t));

  state.env_step += 1;
  state.episode_reward += sr.reward;
  state.episode_cost += sr.cost;
  state.episode_incentive += sr.incentive;

  StepOutcome out;
  out.reward = sr.reward;
  out.cost = sr.cost;
  out.incentive = sr.incentive;
  out.episode_done = sr.done;

  if (sr.done) {
    agent.on_episode_end(state.env_step, state.episode_cost);
    loop_init(state, env, env_rng);
  } else {
    state.obs = sr.obs;
  }

  if (state.env_step > cfg.initial_exploration_steps &&
      buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
    for (int gstep = 0; gstep < cfg.gradient_steps; ++gstep)
      agent.update(buffer, buffer_rng, state.env_step);
  }
  return out;
}

}  // namespace oplab::algos
