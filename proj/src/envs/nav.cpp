#include "oplab/envs/nav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace oplab::envs {

namespace {
constexpr int kPlacementRetries = 200;
}

NavEnv::NavEnv(const NavConfig& cfg) : cfg_(cfg) {
  if (cfg_.arena_half_width <= 0.0 || cfg_.episode_len <= 0 ||
      cfg_.goal_radius <= 0.0 || cfg_.hazard_count < 0 ||
      cfg_.observed_hazards < 0)
    throw ConfigError("nav: invalid configuration");
}

EnvSpec NavEnv::spec() const {
  EnvSpec s;
  // velocity (2) + goal displacement (2) + k hazard displacements (2k) +
  // goal distance (1)
  s.obs_dim = 5 + 2 * cfg_.observed_hazards;
  s.act_dim = 2;
  s.episode_len = cfg_.episode_len;
  return s;
}

bool NavEnv::in_hazard(const Eigen::Vector2d& p) const {
  for (const auto& c : state_.layout.hazard_centers)
    if ((p - c).norm() <= state_.layout.hazard_radius) return true;
  return false;
}

Eigen::Vector2d NavEnv::sample_free_point(RngStream& rng,
                                          double clearance) const {
  const double w = cfg_.arena_half_width;
  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    Eigen::Vector2d p(rng.uniform(-w, w), rng.uniform(-w, w));
    bool clear = true;
    for (const auto& c : state_.layout.hazard_centers) {
      if ((p - c).norm() <= state_.layout.hazard_radius + clearance) {
        clear = false;
        break;
      }
    }
    if (clear) return p;
  }
  throw ConfigError("nav: arena too crowded to place a free point");
}

Eigen::VectorXd NavEnv::reset(RngStream& rng) {
  const double w = cfg_.arena_half_width;
  state_ = NavState{};
  state_.layout.hazard_radius = cfg_.hazard_radius;
  state_.layout.goal_radius = cfg_.goal_radius;
  state_.layout.hazard_centers.clear();
  const double margin = std::min(cfg_.hazard_radius, w);
  for (int i = 0; i < cfg_.hazard_count; ++i)
    state_.layout.hazard_centers.emplace_back(
        rng.uniform(-(w - margin), w - margin),
        rng.uniform(-(w - margin), w - margin));
  state_.position = sample_free_point(rng, 0.0);
  state_.layout.goal = sample_free_point(rng, 0.0);
  // Keep the first goal off the start position so the sparse bonus is earned.
  for (int attempt = 0;
       (state_.layout.goal - state_.position).norm() <
           2.0 * cfg_.goal_radius &&
       attempt < kPlacementRetries;
       ++attempt)
    state_.layout.goal = sample_free_point(rng, 0.0);
  state_.velocity.setZero();
  state_.step_count = 0;
  state_.prev_goal_dist = (state_.position - state_.layout.goal).norm();
  episode_rng_ = RngStream(rng.next_u64(), 0x6e61765fULL);
  return observe();
}

void NavEnv::resample_goal() {
  state_.layout.goal = sample_free_point(episode_rng_, 0.0);
  for (int attempt = 0;
       (state_.layout.goal - state_.position).norm() <
           2.0 * cfg_.goal_radius &&
       attempt < kPlacementRetries;
       ++attempt)
    state_.layout.goal = sample_free_point(episode_rng_, 0.0);
  state_.prev_goal_dist = (state_.position - state_.layout.goal).norm();
}

StepResult NavEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != 2) throw ConfigError("nav: action must be 2-d");
  const double w = cfg_.arena_half_width;

  Eigen::Vector2d v =
      cfg_.drag * state_.velocity + cfg_.accel_gain * action.head<2>();
  const double speed = v.norm();
  if (speed > cfg_.max_speed) v *= cfg_.max_speed / speed;
  Eigen::Vector2d p = state_.position + cfg_.dt * v;
  p.x() = std::clamp(p.x(), -w, w);
  p.y() = std::clamp(p.y(), -w, w);
  state_.velocity = v;
  state_.position = p;

  const double new_goal_dist = (p - state_.layout.goal).norm();
  const double dense =
      cfg_.dense_weight * (state_.prev_goal_dist - new_goal_dist);
  double sparse = 0.0;
  if (new_goal_dist < state_.layout.goal_radius) {
    sparse = cfg_.sparse_bonus;
    resample_goal();  // sets prev_goal_dist for the fresh goal
  } else {
    state_.prev_goal_dist = new_goal_dist;
  }
  const double cost = in_hazard(p) ? 1.0 : 0.0;

  StepResult out;
  out.incentive = dense + sparse;
  out.reward = out.incentive - cfg_.penalty_weight * cost;
  out.cost = cost;
  state_.step_count += 1;
  out.done = state_.step_count >= cfg_.episode_len;
  out.obs = observe();

  if (!dump_path_.empty()) {
    std::ofstream f(dump_path_, std::ios::app);
    f << state_.step_count << ',' << p.x() << ',' << p.y() << ',' << dense
      << ',' << sparse << ',' << out.incentive << ',' << cost << ','
      << out.reward << '\n';
  }
  return out;
}

Eigen::VectorXd NavEnv::observe() const {
  const int k = cfg_.observed_hazards;
  Eigen::VectorXd obs(5 + 2 * k);
  obs.segment<2>(0) = state_.velocity;
  const Eigen::Vector2d goal_disp = state_.layout.goal - state_.position;
  obs.segment<2>(2) = goal_disp;

  // k nearest hazard displacements, padded with zeros when fewer exist.
  std::vector<Eigen::Vector2d> disps;
  disps.reserve(state_.layout.hazard_centers.size());
  for (const auto& c : state_.layout.hazard_centers)
    disps.push_back(c - state_.position);
  std::sort(disps.begin(), disps.end(),
            [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
              return a.squaredNorm() < b.squaredNorm();
            });
  for (int i = 0; i < k; ++i) {
    if (i < static_cast<int>(disps.size()))
      obs.segment<2>(4 + 2 * i) = disps[i];
    else
      obs.segment<2>(4 + 2 * i).setZero();
  }
  obs(4 + 2 * k) = goal_disp.norm();
  return obs;
}

void NavEnv::start_trajectory_dump(const std::string& path) {
  dump_path_ = path;
  std::ofstream f(dump_path_, std::ios::trunc);
  f << "step,px,py,dense,sparse,incentive,cost,reward\n";
}

}  // namespace oplab::envs
