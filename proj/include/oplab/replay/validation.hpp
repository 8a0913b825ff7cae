#pragma once

#include "oplab/envs/env.hpp"
#include "oplab/replay/replay_buffer.hpp"

#include <functional>

namespace oplab::replay {

// Behavior policy used for held-out rollouts; the agent supplies it without
// this module depending on the agent types.
using RolloutPolicy =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& obs, RngStream& rng)>;

// Runs `episodes` full episodes with the given policy and packs them with
// per-episode reward/cost/incentive traces. The transitions are never pushed
// to a training buffer; truncation at the step limit is stored with d = 0.
ValidationSet collect_validation(envs::Env& env, const RolloutPolicy& policy,
                                 int episodes, RngStream& rng);

}  // namespace oplab::replay
