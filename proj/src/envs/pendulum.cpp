#include "oplab/envs/pendulum.hpp"

#include <algorithm>
#include <cmath>

namespace oplab::envs {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Wrap to [-pi, pi); the reward uses the angular distance from upright.
double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}
}  // namespace

Eigen::VectorXd PendulumEnv::reset(RngStream& rng) {
  state_.theta = rng.uniform(-kPi, kPi);
  state_.theta_dot = rng.uniform(-1.0, 1.0);
  step_count_ = 0;
  return observe();
}

StepResult PendulumEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != 1) throw ConfigError("pendulum: action must be 1-d");
  const double torque =
      cfg_.max_torque * std::clamp(action(0), -1.0, 1.0);

  const double angle_err = wrap_angle(state_.theta);
  const double reward = -(angle_err * angle_err +
                          0.1 * state_.theta_dot * state_.theta_dot +
                          0.001 * torque * torque);

  // Semi-implicit Euler; gravity destabilizes the upright fixed point.
  const double accel =
      (cfg_.gravity / cfg_.length) * std::sin(state_.theta) +
      torque / (cfg_.mass * cfg_.length * cfg_.length);
  state_.theta_dot =
      std::clamp(state_.theta_dot + cfg_.dt * accel, -cfg_.max_speed,
                 cfg_.max_speed);
  state_.theta += cfg_.dt * state_.theta_dot;

  step_count_ += 1;
  StepResult out;
  out.reward = reward;
  out.incentive = reward;
  out.cost = 0.0;
  out.done = step_count_ >= cfg_.episode_len;
  out.obs = observe();
  return out;
}

Eigen::VectorXd PendulumEnv::observe() const {
  Eigen::VectorXd obs(3);
  obs << std::cos(state_.theta), std::sin(state_.theta), state_.theta_dot;
  return obs;
}

}  // namespace oplab::envs
