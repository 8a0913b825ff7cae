#pragma once

#include <deque>
#include <optional>
#include <utility>

namespace oplab::algos {

// Episode costs bucketed into aligned epochs of fixed env-step length. J_C
// is the mean total cost of episodes completed in the current epoch window;
// while the current window has none yet, the previous window's episodes are
// used; before any episode completes there is no estimate and the beta
// update is skipped.
class EpochCostLog {
 public:
  explicit EpochCostLog(long epoch_len)
      : epoch_len_(epoch_len > 0 ? epoch_len : 1) {}

  void record(long env_step, double episode_cost) {
    completed_.emplace_back(env_step, episode_cost);
    prune(env_step);
  }

  std::optional<double> mean_cost(long now_step) const {
    const long window_start = (now_step / epoch_len_) * epoch_len_;
    double sum = 0.0;
    int count = 0;
    for (const auto& [step, cost] : completed_) {
      if (step >= window_start) {
        sum += cost;
        ++count;
      }
    }
    if (count == 0) {
      for (const auto& [step, cost] : completed_) {
        if (step >= window_start - epoch_len_ && step < window_start) {
          sum += cost;
          ++count;
        }
      }
    }
    if (count == 0) return std::nullopt;
    return sum / count;
  }

  long epoch_len() const { return epoch_len_; }
  const std::deque<std::pair<long, double>>& entries() const {
    return completed_;
  }
  void restore(std::deque<std::pair<long, double>> entries) {
    completed_ = std::move(entries);
  }

 private:
  void prune(long now_step) {
    const long keep_from = (now_step / epoch_len_) * epoch_len_ - epoch_len_;
    while (!completed_.empty() && completed_.front().first < keep_from)
      completed_.pop_front();
  }

  long epoch_len_;
  std::deque<std::pair<long, double>> completed_;
};

}  // namespace oplab::algos
