#include "oplab/harness/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace oplab::harness {

EnvKind env_from_string(const std::string& name) {
  if (name == "nav_mixed") return EnvKind::kNavMixed;
  if (name == "pendulum") return EnvKind::kPendulum;
  throw std::invalid_argument("unknown env: " + name);
}

std::string to_string(EnvKind e) {
  return e == EnvKind::kNavMixed ? "nav_mixed" : "pendulum";
}

void ExperimentConfig::validate() const {
  agent.validate();
  if (algos::is_constrained(algorithm) && agent.beta_epoch_len == 0 &&
      eval_interval <= 0)
    throw std::invalid_argument("cannot resolve beta_epoch_len");
  if (algos::is_constrained(algorithm)) {
    if (!cost_limit || *cost_limit <= 0.0)
      throw std::invalid_argument(
          "constrained algorithms require cost_limit > 0");
  } else {
    if (penalty_weight < 0.0)
      throw std::invalid_argument("penalty_weight must be >= 0");
  }
  if (total_env_steps < 0 || eval_interval <= 0 || eval_episodes <= 0)
    throw std::invalid_argument("invalid experiment cadence");
  if (buffer_capacity <= 0)
    throw std::invalid_argument("buffer_capacity must be positive");
}

long ExperimentConfig::resolved_early_step() const {
  if (early_step > 0) return early_step;
  if (agent.reset_interval) return *agent.reset_interval;
  return 30000;
}

namespace {

struct KeyHandler {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

long parse_long(const std::string& v) { return std::stol(v); }
double parse_double(const std::string& v) { return std::stod(v); }

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::invalid_argument("expected boolean, got: " + v);
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

const std::map<std::string, KeyHandler>& handlers() {
  static const std::map<std::string, KeyHandler> table = [] {
    std::map<std::string, KeyHandler> h;
    auto add = [&h](const std::string& key,
                    std::function<void(ExperimentConfig&, const std::string&)> set,
                    std::function<std::string(const ExperimentConfig&)> get) {
      h[key] = KeyHandler{std::move(set), std::move(get)};
    };

    add("algorithm",
        [](ExperimentConfig& c, const std::string& v) {
          c.algorithm = algos::algorithm_from_string(v);
        },
        [](const ExperimentConfig& c) { return algos::to_string(c.algorithm); });
    add("env",
        [](ExperimentConfig& c, const std::string& v) {
          c.env = env_from_string(v);
        },
        [](const ExperimentConfig& c) { return to_string(c.env); });
    add("penalty_weight",
        [](ExperimentConfig& c, const std::string& v) {
          c.penalty_weight = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.penalty_weight); });
    add("cost_limit",
        [](ExperimentConfig& c, const std::string& v) {
          if (v == "off" || v == "0")
            c.cost_limit.reset();
          else
            c.cost_limit = parse_double(v);
        },
        [](const ExperimentConfig& c) {
          return c.cost_limit ? format_double(*c.cost_limit) : "off";
        });
    add("total_env_steps",
        [](ExperimentConfig& c, const std::string& v) {
          c.total_env_steps = parse_long(v);
        },
        [](const ExperimentConfig& c) { return std::to_string(c.total_env_steps); });
    add("eval_interval",
        [](ExperimentConfig& c, const std::string& v) {
          c.eval_interval = parse_long(v);
        },
        [](const ExperimentConfig& c) { return std::to_string(c.eval_interval); });
    add("eval_episodes",
        [](ExperimentConfig& c, const std::string& v) {
          c.eval_episodes = std::stoi(v);
        },
        [](const ExperimentConfig& c) { return std::to_string(c.eval_episodes); });
    add("buffer_capacity",
        [](ExperimentConfig& c, const std::string& v) {
          c.buffer_capacity = parse_long(v);
        },
        [](const ExperimentConfig& c) { return std::to_string(c.buffer_capacity); });
    add("checkpoint_interval",
        [](ExperimentConfig& c, const std::string& v) {
          if (v == "off" || v == "0")
            c.checkpoint_interval.reset();
          else
            c.checkpoint_interval = parse_long(v);
        },
        [](const ExperimentConfig& c) {
          return c.checkpoint_interval ? std::to_string(*c.checkpoint_interval)
                                       : "off";
        });
    add("early_step",
        [](ExperimentConfig& c, const std::string& v) {
          c.early_step = parse_long(v);
        },
        [](const ExperimentConfig& c) { return std::to_string(c.early_step); });

    // agent
    add("gamma",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.gamma = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.agent.gamma); });
    add("rho",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.rho = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.agent.rho); });
    add("batch_size",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.batch_size = std::stoi(v);
        },
        [](const ExperimentConfig& c) { return std::to_string(c.agent.batch_size); });
    add("target_update_interval",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.target_update_interval = std::stoi(v);
        },
        [](const ExperimentConfig& c) {
          return std::to_string(c.agent.target_update_interval);
        });
    add("initial_exploration_steps",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.initial_exploration_steps = parse_long(v);
        },
        [](const ExperimentConfig& c) {
          return std::to_string(c.agent.initial_exploration_steps);
        });
    add("gradient_steps",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.gradient_steps = std::stoi(v);
        },
        [](const ExperimentConfig& c) {
          return std::to_string(c.agent.gradient_steps);
        });
    add("lr",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.lr = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.agent.lr); });
    add("lr_alpha",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.lr_alpha = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.agent.lr_alpha); });
    add("lr_beta",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.lr_beta = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.agent.lr_beta); });
    add("entropy_mode",
        [](ExperimentConfig& c, const std::string& v) {
          if (v == "bonus")
            c.agent.entropy_mode = algos::EntropyMode::kBonus;
          else if (v == "max_entropy")
            c.agent.entropy_mode = algos::EntropyMode::kMaxEntropy;
          else if (v == "none")
            c.agent.entropy_mode = algos::EntropyMode::kNone;
          else
            throw std::invalid_argument("unknown entropy_mode: " + v);
        },
        [](const ExperimentConfig& c) {
          switch (c.agent.entropy_mode) {
            case algos::EntropyMode::kBonus: return std::string("bonus");
            case algos::EntropyMode::kMaxEntropy:
              return std::string("max_entropy");
            case algos::EntropyMode::kNone: return std::string("none");
          }
          return std::string("bonus");
        });
    add("reset_interval",
        [](ExperimentConfig& c, const std::string& v) {
          if (v == "off" || v == "0")
            c.agent.reset_interval.reset();
          else
            c.agent.reset_interval = parse_long(v);
        },
        [](const ExperimentConfig& c) {
          return c.agent.reset_interval
                     ? std::to_string(*c.agent.reset_interval)
                     : "off";
        });
    add("n_cost_critics",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.n_cost_critics = std::stoi(v);
        },
        [](const ExperimentConfig& c) {
          return std::to_string(c.agent.n_cost_critics);
        });
    add("independent_batches",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.independent_batches = parse_bool(v);
        },
        [](const ExperimentConfig& c) {
          return std::string(c.agent.independent_batches ? "1" : "0");
        });
    add("hidden",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.hidden = parse_int_list(v);
        },
        [](const ExperimentConfig& c) { return format_int_list(c.agent.hidden); });
    add("activation",
        [](ExperimentConfig& c, const std::string& v) {
          if (v == "default")
            c.agent.activation.reset();
          else if (v == "tanh")
            c.agent.activation = diffcore::Activation::kTanh;
          else if (v == "relu")
            c.agent.activation = diffcore::Activation::kRelu;
          else
            throw std::invalid_argument("unknown activation: " + v);
        },
        [](const ExperimentConfig& c) {
          if (!c.agent.activation) return std::string("default");
          return std::string(*c.agent.activation ==
                                     diffcore::Activation::kTanh
                                 ? "tanh"
                                 : "relu");
        });
    add("state_dependent_std",
        [](ExperimentConfig& c, const std::string& v) {
          if (v == "default")
            c.agent.state_dependent_std.reset();
          else
            c.agent.state_dependent_std = parse_bool(v);
        },
        [](const ExperimentConfig& c) {
          if (!c.agent.state_dependent_std) return std::string("default");
          return std::string(*c.agent.state_dependent_std ? "1" : "0");
        });
    add("alpha_init",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.alpha_init = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.agent.alpha_init); });
    add("beta_init",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.beta_init = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.agent.beta_init); });
    add("target_entropy",
        [](ExperimentConfig& c, const std::string& v) {
          if (v == "auto")
            c.agent.target_entropy.reset();
          else
            c.agent.target_entropy = parse_double(v);
        },
        [](const ExperimentConfig& c) {
          return c.agent.target_entropy
                     ? format_double(*c.agent.target_entropy)
                     : "auto";
        });
    add("beta_epoch_len",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.beta_epoch_len = parse_long(v);
        },
        [](const ExperimentConfig& c) {
          return std::to_string(c.agent.beta_epoch_len);
        });
    add("policy_delay",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.policy_delay = std::stoi(v);
        },
        [](const ExperimentConfig& c) {
          return std::to_string(c.agent.policy_delay);
        });
    add("sigma_smooth",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.sigma_smooth = parse_double(v);
        },
        [](const ExperimentConfig& c) {
          return format_double(c.agent.sigma_smooth);
        });
    add("c_smooth",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.c_smooth = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.agent.c_smooth); });
    add("sigma_expl",
        [](ExperimentConfig& c, const std::string& v) {
          c.agent.sigma_expl = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.agent.sigma_expl); });

    // nav environment
    add("nav_arena_half_width",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.arena_half_width = parse_double(v);
        },
        [](const ExperimentConfig& c) {
          return format_double(c.nav.arena_half_width);
        });
    add("nav_hazard_count",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.hazard_count = std::stoi(v);
        },
        [](const ExperimentConfig& c) {
          return std::to_string(c.nav.hazard_count);
        });
    add("nav_hazard_radius",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.hazard_radius = parse_double(v);
        },
        [](const ExperimentConfig& c) {
          return format_double(c.nav.hazard_radius);
        });
    add("nav_goal_radius",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.goal_radius = parse_double(v);
        },
        [](const ExperimentConfig& c) {
          return format_double(c.nav.goal_radius);
        });
    add("nav_episode_len",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.episode_len = std::stoi(v);
        },
        [](const ExperimentConfig& c) {
          return std::to_string(c.nav.episode_len);
        });
    add("nav_dt",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.dt = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.nav.dt); });
    add("nav_observed_hazards",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.observed_hazards = std::stoi(v);
        },
        [](const ExperimentConfig& c) {
          return std::to_string(c.nav.observed_hazards);
        });
    add("nav_dense_weight",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.dense_weight = parse_double(v);
        },
        [](const ExperimentConfig& c) {
          return format_double(c.nav.dense_weight);
        });
    add("nav_sparse_bonus",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.sparse_bonus = parse_double(v);
        },
        [](const ExperimentConfig& c) {
          return format_double(c.nav.sparse_bonus);
        });
    add("nav_drag",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.drag = parse_double(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.nav.drag); });
    add("nav_accel_gain",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.accel_gain = parse_double(v);
        },
        [](const ExperimentConfig& c) {
          return format_double(c.nav.accel_gain);
        });
    add("nav_max_speed",
        [](ExperimentConfig& c, const std::string& v) {
          c.nav.max_speed = parse_double(v);
        },
        [](const ExperimentConfig& c) {
          return format_double(c.nav.max_speed);
        });
    add("pendulum_episode_len",
        [](ExperimentConfig& c, const std::string& v) {
          c.pendulum.episode_len = std::stoi(v);
        },
        [](const ExperimentConfig& c) {
          return std::to_string(c.pendulum.episode_len);
        });
    return h;
  }();
  return table;
}

std::pair<std::string, std::string> split_kv(const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config line missing '=': " + line);
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return std::string();
    return s.substr(b, e - b + 1);
  };
  return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
}

void set_key(ExperimentConfig& cfg, const std::string& key,
             const std::string& value) {
  const auto it = handlers().find(key);
  if (it == handlers().end())
    throw std::invalid_argument("unknown config key: " + key);
  it->second.set(cfg, value);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto [key, value] = split_kv(line);
    set_key(cfg, key, value);
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_overrides(ExperimentConfig& cfg,
                     const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto [key, value] = split_kv(o);
    set_key(cfg, key, value);
  }
}

std::string to_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, handler] : handlers())
    out += key + " = " + handler.get(cfg) + "\n";
  return out;
}

}  // namespace oplab::harness
