#pragma once

#include "oplab/envs/env.hpp"

#include <string>
#include <vector>

namespace oplab::envs {

// Randomized point-mass navigation with circular hazards. The agent collects
// a dense reward for closing in on the goal, a sparse bonus for reaching it
// (after which the goal moves), and a unit cost for every step spent inside
// a hazard. With penalty_weight > 0 the cost is folded into the reward
// (unconstrained mode); with 0 the reward and cost streams stay separate.
struct NavConfig {
  double arena_half_width = 2.0;
  int hazard_count = 6;
  double hazard_radius = 0.25;
  double goal_radius = 0.2;
  int episode_len = 200;
  double dt = 0.1;
  int observed_hazards = 3;  // k nearest in the observation
  double drag = 0.95;
  double accel_gain = 0.2;
  double max_speed = 1.5;
  double dense_weight = 1.0;
  double sparse_bonus = 1.0;
  double penalty_weight = 0.0;
};

struct NavLayout {
  Eigen::Vector2d goal;
  std::vector<Eigen::Vector2d> hazard_centers;
  double hazard_radius = 0.0;
  double goal_radius = 0.0;
};

struct NavState {
  Eigen::Vector2d position;
  Eigen::Vector2d velocity;
  NavLayout layout;
  int step_count = 0;
  double prev_goal_dist = 0.0;
};

class NavEnv : public Env {
 public:
  explicit NavEnv(const NavConfig& cfg);

  EnvSpec spec() const override;
  Eigen::VectorXd reset(RngStream& rng) override;
  StepResult step(const Eigen::VectorXd& action) override;

  Eigen::VectorXd observe() const;
  const NavState& state() const { return state_; }
  void set_state(const NavState& s) { state_ = s; }
  const NavConfig& config() const { return cfg_; }

  bool in_hazard(const Eigen::Vector2d& p) const;

  // step, px, py, dense, sparse, incentive, cost, reward
  void start_trajectory_dump(const std::string& path);

 private:
  Eigen::Vector2d sample_free_point(RngStream& rng, double clearance) const;
  void resample_goal();

  NavConfig cfg_;
  NavState state_;
  // Re-seeded from the caller's stream at every reset so that mid-episode
  // goal resampling stays deterministic without holding outside references.
  RngStream episode_rng_{0, 0};
  std::string dump_path_;
};

}  // namespace oplab::envs
