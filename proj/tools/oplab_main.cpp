#include "oplab/diag/metrics.hpp"
#include "oplab/harness/runner.hpp"
#include "oplab/replay/validation.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

oplab::harness::ExperimentConfig load_config(
    const std::string& config_path, const std::vector<std::string>& overrides) {
  oplab::harness::ExperimentConfig cfg;
  if (!config_path.empty())
    cfg = oplab::harness::parse_config_file(config_path);
  oplab::harness::apply_overrides(cfg, overrides);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy actor-critic laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::string out_dir;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Config file (key = value)");
    cmd->add_option("--override", overrides,
                    "key=value override, repeatable");
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--out", out_dir, "Output directory");
  };

  auto* train = app.add_subcommand("train", "Train one (config, seed) run");
  add_common(train);

  auto* evaluate =
      app.add_subcommand("evaluate", "Roll out a saved checkpoint");
  std::string checkpoint_path;
  int episodes = 5;
  bool deterministic = false;
  evaluate->add_option("--checkpoint", checkpoint_path, "Agent checkpoint")
      ->required();
  evaluate->add_option("--episodes", episodes, "Episode count");
  evaluate->add_flag("--deterministic", deterministic,
                     "Use the distribution mode instead of sampling");
  evaluate->add_option("--seed", seed, "Evaluation seed");
  evaluate->add_option("--out", out_dir, "Optional CSV output directory");

  auto* diagnose = app.add_subcommand(
      "diagnose", "Validation TD error and Q error for a checkpoint");
  diagnose->add_option("--checkpoint", checkpoint_path, "Agent checkpoint")
      ->required();
  diagnose->add_option("--episodes", episodes, "Validation episodes");
  diagnose->add_option("--seed", seed, "Validation seed");

  auto* aggregate =
      app.add_subcommand("aggregate", "Cross-seed IQM / profile tables");
  std::vector<std::string> run_dirs;
  std::string metric = "ep_reward";
  long early_step = 0;
  aggregate->add_option("--runs", run_dirs, "Run directories")->required();
  aggregate->add_option("--metric", metric,
                        "ep_reward|ep_incentive|ep_cost|td_err_reward|q_err");
  aggregate->add_option("--early-step", early_step,
                        "Checkpoint used as 'early training' for the "
                        "cost-adjustment ratio (0: from config default)");
  aggregate->add_option("--out", out_dir, "Output directory")->required();

  auto* reference = app.add_subcommand(
      "reference-cost", "Suggest a cost limit from a penalty-0 run");
  add_common(reference);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto cfg = load_config(config_path, overrides);
      if (out_dir.empty()) {
        std::cerr << "train: --out is required\n";
        return 1;
      }
      const auto summary = oplab::harness::run_experiment(cfg, seed, out_dir);
      const auto fw = summary.final_window();
      std::cout << "run complete: " << summary.records.size()
                << " checkpoints, final-window reward " << fw.reward
                << ", incentive " << fw.incentive << ", cost " << fw.cost
                << "\n";
    } else if (evaluate->parsed()) {
      auto loaded = oplab::harness::load_agent_checkpoint(checkpoint_path);
      auto env = oplab::harness::make_env(loaded.cfg);
      oplab::RngStream rng(seed, oplab::stream_id::kEvalEnv);
      oplab::replay::RolloutPolicy policy;
      if (deterministic) {
        policy = [&](const Eigen::VectorXd& obs, oplab::RngStream&) {
          return loaded.agent->act_deterministic(obs);
        };
      } else {
        policy = loaded.agent->rollout_policy();
      }
      const auto val =
          oplab::replay::collect_validation(*env, policy, episodes, rng);
      std::ofstream csv;
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        csv.open(std::filesystem::path(out_dir) / "evaluate.csv",
                 std::ios::trunc);
        csv << "episode,reward,incentive,cost\n";
      }
      double mean_reward = 0.0;
      for (std::size_t i = 0; i < val.episodes.size(); ++i) {
        const auto& ep = val.episodes[i];
        std::cout << "episode " << i << ": reward " << ep.total_reward()
                  << ", incentive " << ep.total_incentive() << ", cost "
                  << ep.total_cost() << "\n";
        if (csv.is_open())
          csv << i << ',' << ep.total_reward() << ',' << ep.total_incentive()
              << ',' << ep.total_cost() << '\n';
        mean_reward += ep.total_reward();
      }
      std::cout << "mean reward: " << mean_reward / val.episodes.size()
                << "\n";
    } else if (diagnose->parsed()) {
      auto loaded = oplab::harness::load_agent_checkpoint(checkpoint_path);
      auto env = oplab::harness::make_env(loaded.cfg);
      oplab::RngStream env_rng(seed, oplab::stream_id::kEvalEnv);
      oplab::RngStream val_rng(seed, oplab::stream_id::kValidation);
      const auto val = oplab::replay::collect_validation(
          *env, loaded.agent->rollout_policy(), episodes, env_rng);
      const auto td =
          oplab::diag::validation_td_error(*loaded.agent, val, val_rng);
      const double q_err = oplab::diag::q_estimation_error(
          *loaded.agent, val,
          oplab::harness::resolved_agent_config(loaded.cfg).gamma);
      std::cout << "validation TD error (reward): " << td.reward_rms << "\n";
      if (td.cost_rms)
        std::cout << "validation TD error (cost): " << *td.cost_rms << "\n";
      std::cout << "Q estimation error: " << q_err << "\n";
    } else if (aggregate->parsed()) {
      long resolved_early = early_step;
      if (resolved_early == 0) {
        const auto first =
            oplab::harness::parse_config_file(run_dirs.front() +
                                              "/resolved.cfg");
        resolved_early = first.resolved_early_step();
      }
      oplab::harness::aggregate_runs(run_dirs, metric, out_dir,
                                     resolved_early);
      std::cout << "wrote iqm.csv, profile.csv, fig2_points.csv to "
                << out_dir << "\n";
    } else if (reference->parsed()) {
      const auto cfg = load_config(config_path, overrides);
      const double m =
          oplab::harness::reference_cost_run(cfg, seed, out_dir);
      std::cout << "suggested cost limit M = " << m << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
