#pragma once

#include "oplab/common/rng.hpp"

#include <Eigen/Core>

#include <memory>
#include <stdexcept>

namespace oplab::envs {

struct EnvSpec {
  int obs_dim = 0;
  int act_dim = 0;
  int episode_len = 1000;
};

// Output of one environment step. `done` is raised only at the step limit
// (neither task has true terminal states); `incentive` is the reward with
// any cost penalty removed, logged separately for the mixed-sign
// diagnostics.
struct StepResult {
  Eigen::VectorXd obs;
  double reward = 0.0;
  double cost = 0.0;  // 0 or 1
  bool done = false;
  double incentive = 0.0;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Plain state-machine interface; one instance per run thread.
class Env {
 public:
  virtual ~Env() = default;
  virtual EnvSpec spec() const = 0;
  virtual Eigen::VectorXd reset(RngStream& rng) = 0;
  virtual StepResult step(const Eigen::VectorXd& action) = 0;
};

}  // namespace oplab::envs
