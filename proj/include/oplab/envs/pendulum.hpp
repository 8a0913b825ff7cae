#pragma once

#include "oplab/envs/env.hpp"

namespace oplab::envs {

// Torque-limited swing-up with a plain (single-sign) reward; stands in for
// the standard control regime. Cost is identically zero.
struct PendulumConfig {
  double gravity = 9.8;
  double length = 1.0;
  double mass = 1.0;
  double max_torque = 2.0;
  double max_speed = 8.0;
  double dt = 0.05;
  int episode_len = 200;
};

struct PendulumState {
  double theta = 0.0;      // 0 = upright
  double theta_dot = 0.0;
};

class PendulumEnv : public Env {
 public:
  explicit PendulumEnv(const PendulumConfig& cfg = {}) : cfg_(cfg) {}

  EnvSpec spec() const override {
    return EnvSpec{3, 1, cfg_.episode_len};
  }

  Eigen::VectorXd reset(RngStream& rng) override;
  StepResult step(const Eigen::VectorXd& action) override;

  Eigen::VectorXd observe() const;
  const PendulumState& state() const { return state_; }
  void set_state(const PendulumState& s) { state_ = s; }
  const PendulumConfig& config() const { return cfg_; }

 private:
  PendulumConfig cfg_;
  PendulumState state_;
  int step_count_ = 0;
};

}  // namespace oplab::envs
