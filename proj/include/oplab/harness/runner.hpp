#pragma once

#include "oplab/diag/metrics.hpp"
#include "oplab/harness/config.hpp"

#include <memory>
#include <string>
#include <vector>

namespace oplab::harness {

std::unique_ptr<envs::Env> make_env(const ExperimentConfig& cfg);

// Agent config with auto fields (beta epoch length) resolved against the
// experiment cadence.
algos::AgentConfig resolved_agent_config(const ExperimentConfig& cfg);

// Executes the full training/evaluation protocol for one (config, seed)
// pair. When out_dir is non-empty, writes metrics.jsonl incrementally (so
// interrupted runs stay inspectable), plus summary.csv, timing.csv,
// resolved.cfg and a final checkpoint. Wall-clock goes to timing.csv only;
// metrics.jsonl is byte-reproducible per (config, seed).
diag::RunSummary run_experiment(const ExperimentConfig& cfg,
                                std::uint64_t seed,
                                const std::string& out_dir = "");

// Trains a cost-unaware (penalty 0) unconstrained agent with the same
// protocol and suggests half its final-window mean episode cost as the cost
// limit M.
double reference_cost_run(ExperimentConfig cfg, std::uint64_t seed,
                          const std::string& out_dir = "");

// Reads a run directory's metrics.jsonl back into a RunSummary.
diag::RunSummary load_run_summary(const std::string& run_dir);

// Cross-seed tables: per-checkpoint IQM with min/max (iqm.csv), the
// performance profile over final-checkpoint scores (profile.csv) and the
// per-run cost-adjustment-ratio scatter (fig2_points.csv). Runs must share
// their checkpoint grid. `metric` is one of ep_reward, ep_incentive,
// ep_cost, td_err_reward, q_err.
void aggregate_runs(const std::vector<std::string>& run_dirs,
                    const std::string& metric, const std::string& out_dir,
                    long early_step);

// Full-agent checkpoint: config text + seed + every parameter store.
void save_agent_checkpoint(const std::string& path,
                           const ExperimentConfig& cfg, std::uint64_t seed,
                           const algos::Agent& agent);

struct LoadedAgent {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  std::unique_ptr<algos::Agent> agent;
};
LoadedAgent load_agent_checkpoint(const std::string& path);

double metric_value(const diag::MetricsRecord& rec, const std::string& name);

}  // namespace oplab::harness
