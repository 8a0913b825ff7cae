#include "oplab/harness/runner.hpp"

#include "oplab/algos/train_loop.hpp"
#include "oplab/replay/validation.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace oplab::harness {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::unique_ptr<envs::Env> make_env(const ExperimentConfig& cfg) {
  if (cfg.env == EnvKind::kNavMixed) {
    envs::NavConfig nav = cfg.nav;
    // Constrained runs keep reward and cost separate.
    nav.penalty_weight =
        algos::is_constrained(cfg.algorithm) ? 0.0 : cfg.penalty_weight;
    return std::make_unique<envs::NavEnv>(nav);
  }
  return std::make_unique<envs::PendulumEnv>(cfg.pendulum);
}

algos::AgentConfig resolved_agent_config(const ExperimentConfig& cfg) {
  algos::AgentConfig a = cfg.agent;
  if (a.beta_epoch_len == 0) a.beta_epoch_len = cfg.eval_interval;
  if (cfg.cost_limit) a.cost_limit = *cfg.cost_limit;
  return a;
}

namespace {

ordered_json record_to_json(const diag::MetricsRecord& rec) {
  ordered_json j;
  j["env_step"] = rec.env_step;
  j["ep_reward"] = rec.ep_reward;
  j["ep_incentive"] = rec.ep_incentive;
  j["ep_cost"] = rec.ep_cost;
  j["td_err_reward"] = rec.td_err_reward;
  if (rec.td_err_cost)
    j["td_err_cost"] = *rec.td_err_cost;
  else
    j["td_err_cost"] = nullptr;
  j["q_err"] = rec.q_err;
  if (rec.alpha)
    j["alpha"] = *rec.alpha;
  else
    j["alpha"] = nullptr;
  if (rec.beta)
    j["beta"] = *rec.beta;
  else
    j["beta"] = nullptr;
  return j;
}

diag::MetricsRecord record_from_json(const ordered_json& j) {
  diag::MetricsRecord rec;
  rec.env_step = j.at("env_step").get<long>();
  rec.ep_reward = j.at("ep_reward").get<double>();
  rec.ep_incentive = j.at("ep_incentive").get<double>();
  rec.ep_cost = j.at("ep_cost").get<double>();
  rec.td_err_reward = j.at("td_err_reward").get<double>();
  if (!j.at("td_err_cost").is_null())
    rec.td_err_cost = j.at("td_err_cost").get<double>();
  rec.q_err = j.at("q_err").get<double>();
  if (!j.at("alpha").is_null()) rec.alpha = j.at("alpha").get<double>();
  if (!j.at("beta").is_null()) rec.beta = j.at("beta").get<double>();
  return rec;
}

void write_summary_csv(const std::string& path,
                       const diag::RunSummary& summary) {
  std::ofstream f(path, std::ios::trunc);
  const auto fw = summary.final_window();
  f.precision(17);
  f << "checkpoints,final_window_checkpoints,final_reward,final_incentive,"
       "final_cost\n";
  f << summary.records.size() << ',' << fw.checkpoints << ',' << fw.reward
    << ',' << fw.incentive << ',' << fw.cost << '\n';
}

}  // namespace

diag::RunSummary run_experiment(const ExperimentConfig& cfg,
                                std::uint64_t seed,
                                const std::string& out_dir) {
  cfg.validate();
  const algos::AgentConfig acfg = resolved_agent_config(cfg);

  auto env = make_env(cfg);
  auto eval_env = make_env(cfg);
  RngStream env_rng(seed, stream_id::kEnv);
  RngStream eval_env_rng(seed, stream_id::kEvalEnv);
  RngStream buffer_rng(seed, stream_id::kBufferSample);
  RngStream validation_rng(seed, stream_id::kValidation);

  auto agent = algos::make_agent(cfg.algorithm, acfg, env->spec(), seed);
  replay::ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  algos::LoopState state;
  algos::loop_init(state, *env, env_rng);

  std::ofstream metrics_out;
  std::ofstream timing_out;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream cfg_out(fs::path(out_dir) / "resolved.cfg");
    cfg_out << to_text(cfg);
    metrics_out.open(fs::path(out_dir) / "metrics.jsonl", std::ios::trunc);
    timing_out.open(fs::path(out_dir) / "timing.csv", std::ios::trunc);
    timing_out << "env_step,wall_clock_s\n";
  }

  diag::RunSummary summary;
  const auto t0 = std::chrono::steady_clock::now();

  for (long step = 1; step <= cfg.total_env_steps; ++step) {
    algos::train_step(*agent, *env, buffer, state, env_rng, buffer_rng);

    if (step % cfg.eval_interval == 0) {
      const auto val = replay::collect_validation(
          *eval_env, agent->rollout_policy(), cfg.eval_episodes,
          eval_env_rng);
      diag::MetricsRecord rec;
      rec.env_step = step;
      for (const auto& ep : val.episodes) {
        rec.ep_reward += ep.total_reward();
        rec.ep_incentive += ep.total_incentive();
        rec.ep_cost += ep.total_cost();
      }
      const double n = static_cast<double>(val.episodes.size());
      rec.ep_reward /= n;
      rec.ep_incentive /= n;
      rec.ep_cost /= n;
      const auto td = diag::validation_td_error(*agent, val, validation_rng);
      rec.td_err_reward = td.reward_rms;
      rec.td_err_cost = td.cost_rms;
      rec.q_err = diag::q_estimation_error(*agent, val, acfg.gamma);
      rec.alpha = agent->alpha();
      rec.beta = agent->beta();
      rec.wall_clock_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      summary.records.push_back(rec);
      if (metrics_out.is_open()) {
        metrics_out << record_to_json(rec).dump() << '\n';
        metrics_out.flush();
        timing_out << rec.env_step << ',' << rec.wall_clock_s << '\n';
        timing_out.flush();
      }
    }

    // Evaluation first, then the scheduled reset, so the checkpoint at a
    // reset step reflects the pre-reset networks.
    agent->maybe_reset(step);

    if (!out_dir.empty() && cfg.checkpoint_interval &&
        step % *cfg.checkpoint_interval == 0) {
      save_agent_checkpoint(
          (fs::path(out_dir) / ("checkpoint_" + std::to_string(step) + ".bin"))
              .string(),
          cfg, seed, *agent);
    }
  }

  if (!out_dir.empty()) {
    write_summary_csv((fs::path(out_dir) / "summary.csv").string(), summary);
    save_agent_checkpoint(
        (fs::path(out_dir) / "checkpoint_final.bin").string(), cfg, seed,
        *agent);
  }
  return summary;
}

double reference_cost_run(ExperimentConfig cfg, std::uint64_t seed,
                          const std::string& out_dir) {
  if (cfg.env != EnvKind::kNavMixed)
    throw std::invalid_argument("reference_cost_run expects the nav env");
  cfg.algorithm = algos::Algorithm::kOpac2;
  cfg.penalty_weight = 0.0;
  cfg.cost_limit.reset();
  RngStream seed_rng(seed, stream_id::kReference);
  const auto summary = run_experiment(cfg, seed_rng.next_u64(), out_dir);
  return summary.final_window().cost / 2.0;
}

diag::RunSummary load_run_summary(const std::string& run_dir) {
  const fs::path path = fs::path(run_dir) / "metrics.jsonl";
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open " + path.string());
  diag::RunSummary summary;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    summary.records.push_back(record_from_json(ordered_json::parse(line)));
  }
  return summary;
}

double metric_value(const diag::MetricsRecord& rec, const std::string& name) {
  if (name == "ep_reward") return rec.ep_reward;
  if (name == "ep_incentive") return rec.ep_incentive;
  if (name == "ep_cost") return rec.ep_cost;
  if (name == "td_err_reward") return rec.td_err_reward;
  if (name == "q_err") return rec.q_err;
  throw std::invalid_argument("unknown metric: " + name);
}

void aggregate_runs(const std::vector<std::string>& run_dirs,
                    const std::string& metric, const std::string& out_dir,
                    long early_step) {
  if (run_dirs.empty())
    throw std::invalid_argument("aggregate: need at least one run");
  std::vector<diag::RunSummary> runs;
  runs.reserve(run_dirs.size());
  for (const auto& dir : run_dirs) runs.push_back(load_run_summary(dir));

  const std::size_t checkpoints = runs.front().records.size();
  for (const auto& r : runs) {
    if (r.records.size() != checkpoints)
      throw std::runtime_error("aggregate: checkpoint counts differ");
    for (std::size_t i = 0; i < checkpoints; ++i)
      if (r.records[i].env_step != runs.front().records[i].env_step)
        throw std::runtime_error("aggregate: checkpoint grids differ");
  }

  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "iqm.csv", std::ios::trunc);
    f.precision(17);
    f << "env_step,iqm,min,max\n";
    for (std::size_t i = 0; i < checkpoints; ++i) {
      std::vector<double> scores;
      scores.reserve(runs.size());
      for (const auto& r : runs)
        scores.push_back(metric_value(r.records[i], metric));
      const double lo = *std::min_element(scores.begin(), scores.end());
      const double hi = *std::max_element(scores.begin(), scores.end());
      f << runs.front().records[i].env_step << ',' << diag::iqm(scores) << ','
        << lo << ',' << hi << '\n';
    }
  }
  {
    std::vector<double> finals;
    for (const auto& r : runs)
      finals.push_back(metric_value(r.records.back(), metric));
    const double lo = *std::min_element(finals.begin(), finals.end());
    const double hi = *std::max_element(finals.begin(), finals.end());
    std::ofstream f(fs::path(out_dir) / "profile.csv", std::ios::trunc);
    f.precision(17);
    f << "threshold,fraction\n";
    const int kGrid = 101;
    std::vector<double> thresholds;
    for (int i = 0; i < kGrid; ++i)
      thresholds.push_back(lo + (hi - lo) * i / (kGrid - 1));
    const auto fractions = diag::performance_profile(finals, thresholds);
    for (int i = 0; i < kGrid; ++i)
      f << thresholds[i] << ',' << fractions[i] << '\n';
  }
  {
    std::ofstream f(fs::path(out_dir) / "fig2_points.csv", std::ios::trunc);
    f.precision(17);
    f << "run,cost_adjustment_ratio,ratio_defined,final_reward\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto ratio = diag::cost_adjustment_ratio(runs[i], early_step);
      f << run_dirs[i] << ',' << ratio.value << ','
        << (ratio.defined ? 1 : 0) << ','
        << runs[i].final_window().reward << '\n';
    }
  }
}

namespace {
constexpr std::uint32_t kAgentMagic = 0x4F504147;  // "OPAG"
}

void save_agent_checkpoint(const std::string& path,
                           const ExperimentConfig& cfg, std::uint64_t seed,
                           const algos::Agent& agent) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.write(reinterpret_cast<const char*>(&kAgentMagic), sizeof(kAgentMagic));
  out.write(reinterpret_cast<const char*>(&seed), sizeof(seed));
  const std::string cfg_text = to_text(cfg);
  const std::uint64_t len = cfg_text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(cfg_text.data(), static_cast<std::streamsize>(len));
  agent.save(out);
}

LoadedAgent load_agent_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint32_t magic = 0;
  in.read(reinterpret_cast<char*>(&magic), sizeof(magic));
  if (magic != kAgentMagic)
    throw std::runtime_error("not an agent checkpoint: " + path);
  LoadedAgent loaded;
  in.read(reinterpret_cast<char*>(&loaded.seed), sizeof(loaded.seed));
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string cfg_text(len, '\0');
  in.read(cfg_text.data(), static_cast<std::streamsize>(len));
  loaded.cfg = parse_config_text(cfg_text);
  const auto env = make_env(loaded.cfg);
  loaded.agent =
      algos::make_agent(loaded.cfg.algorithm,
                        resolved_agent_config(loaded.cfg), env->spec(),
                        loaded.seed);
  loaded.agent->load(in);
  return loaded;
}

}  // namespace oplab::harness
