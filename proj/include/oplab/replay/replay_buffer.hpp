#pragma once

#include "oplab/common/rng.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace oplab::replay {

// One environment step. `d` marks a true terminal state; step-limit
// truncation is stored with d = 0 so bootstrapping continues across the
// artificial horizon.
struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0.0;
  double c = 0.0;
  Eigen::VectorXd s_next;
  bool d = false;
};

// Column-stacked minibatch view used by the update rules.
struct Batch {
  Eigen::MatrixXd s;       // n x obs_dim
  Eigen::MatrixXd a;       // n x act_dim
  Eigen::VectorXd r;
  Eigen::VectorXd c;
  Eigen::MatrixXd s_next;  // n x obs_dim
  Eigen::VectorXd d;       // 0/1
  Eigen::Index size() const { return r.size(); }
};

class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fixed-capacity ring of transitions with uniform with-replacement sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw StateError("replay buffer capacity must be > 0");
    storage_.reserve(capacity);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return storage_.size(); }

  void push(Transition t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[write_head_] = std::move(t);
      write_head_ = (write_head_ + 1) % capacity_;
    }
  }

  // i-th live entry in push order, 0 = oldest.
  const Transition& at_ordered(std::size_t i) const {
    if (i >= storage_.size()) throw StateError("replay index out of range");
    if (storage_.size() < capacity_) return storage_[i];
    return storage_[(write_head_ + i) % capacity_];
  }

  std::vector<std::size_t> sample_indices(std::size_t n, RngStream& rng) const {
    if (storage_.empty()) throw StateError("cannot sample from empty buffer");
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = rng.uniform_index(storage_.size());
    return idx;
  }

  Batch sample_batch(std::size_t n, RngStream& rng) const;

  // CSV dump (one row per live transition, oldest first) for offline
  // inspection; columns documented in the header row.
  void dump_csv(const std::string& path) const;

 private:
  std::size_t capacity_;
  std::size_t write_head_ = 0;
  std::vector<Transition> storage_;
};

// One held-out rollout with its per-step reward/cost traces kept alongside
// the transitions so Monte Carlo returns can be formed per step.
struct EvalEpisode {
  std::vector<Transition> transitions;
  Eigen::VectorXd rewards;
  Eigen::VectorXd costs;
  // Reward excluding the penalty term (equals rewards when no penalty).
  Eigen::VectorXd incentives;

  double total_reward() const { return rewards.sum(); }
  double total_cost() const { return costs.sum(); }
  double total_incentive() const { return incentives.sum(); }
};

// Held-out transitions, never pushed to the training buffer.
struct ValidationSet {
  std::vector<EvalEpisode> episodes;

  std::size_t total_transitions() const {
    std::size_t n = 0;
    for (const auto& e : episodes) n += e.transitions.size();
    return n;
  }
};

}  // namespace oplab::replay
