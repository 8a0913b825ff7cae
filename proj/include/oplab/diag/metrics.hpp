#pragma once

#include "oplab/algos/agent.hpp"
#include "oplab/replay/replay_buffer.hpp"

#include <optional>
#include <vector>

namespace oplab::diag {

// One evaluation-epoch row.
struct MetricsRecord {
  long env_step = 0;
  double ep_reward = 0.0;     // mean episode total reward
  double ep_incentive = 0.0;  // mean episode incentive (penalty excluded)
  double ep_cost = 0.0;       // mean episode total cost
  double td_err_reward = 0.0;
  std::optional<double> td_err_cost;
  double q_err = 0.0;
  std::optional<double> alpha;
  std::optional<double> beta;
  double wall_clock_s = 0.0;  // kept out of metrics.jsonl (see harness docs)
};

struct FinalWindow {
  double reward = 0.0;
  double incentive = 0.0;
  double cost = 0.0;
  int checkpoints = 0;
};

struct RunSummary {
  std::vector<MetricsRecord> records;

  // Aggregates over the last 10% of checkpoints (at least one).
  FinalWindow final_window() const;
};

struct TdErrorReport {
  double reward_rms = 0.0;
  std::optional<double> cost_rms;
};

// Root-mean-square Bellman residual of the agent's own backup over held-out
// transitions; constrained agents report the cost stream separately.
TdErrorReport validation_td_error(const algos::Agent& agent,
                                  const replay::ValidationSet& val,
                                  RngStream& rng);

// Discounted return of one reward sequence.
double mc_return(const Eigen::VectorXd& rewards, double gamma);

// Signed mean of Q(s_t, a_t) minus the truncated discounted Monte Carlo
// return from t; negative values mean underestimation.
double q_estimation_error(const algos::Agent& agent,
                          const replay::ValidationSet& val, double gamma);

// (cost_start - cost_early) / (incentive_start - incentive_early); flagged
// undefined when the incentive change is below 1e-9 in magnitude.
struct RatioResult {
  double value = 0.0;
  bool defined = false;
};
RatioResult cost_adjustment_ratio(const RunSummary& run, long early_step);

// Interquartile mean with fractional trimming: the middle 50% of the sorted
// scores, boundary elements weighted by their overlap with [0.25, 0.75].
double iqm(std::vector<double> scores);

// Fraction of scores strictly above each threshold; non-increasing.
std::vector<double> performance_profile(const std::vector<double>& scores,
                                        const std::vector<double>& thresholds);

}  // namespace oplab::diag
