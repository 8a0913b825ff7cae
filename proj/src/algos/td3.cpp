#include "oplab/algos/td3.hpp"

#include "oplab/algos/losses.hpp"
#include "oplab/diffcore/mathutil.hpp"
#include "util.hpp"

#include <istream>
#include <ostream>

namespace oplab::algos {

using diffcore::Graph;
using diffcore::Matrix;
using diffcore::Var;

namespace {

diffcore::MLPSpec td3_net_spec(const AgentConfig& cfg, int input_dim,
                               int output_dim) {
  diffcore::MLPSpec s;
  s.input_dim = input_dim;
  s.hidden_dims = cfg.hidden;
  s.output_dim = output_dim;
  s.activation = cfg.activation.value_or(diffcore::Activation::kRelu);
  return s;
}

}  // namespace

Td3Agent::Td3Agent(const AgentConfig& cfg, const envs::EnvSpec& env_spec,
                   std::uint64_t master_seed, bool constrained)
    : Agent(cfg, env_spec, master_seed),
      constrained_(constrained),
      actor_spec_(td3_net_spec(cfg_, env_spec.obs_dim, env_spec.act_dim)),
      q_spec_(td3_net_spec(cfg_, env_spec.obs_dim + env_spec.act_dim, 1)),
      beta_(cfg_.beta_init),
      epoch_costs_(cfg_.beta_epoch_len) {
  RngStream actor_rng(master_seed, stream_id::kInitPolicy);
  RngStream q1_rng(master_seed, stream_id::kInitQReward1);
  RngStream q2_rng(master_seed, stream_id::kInitQReward2);
  actor_ = diffcore::init_params(actor_spec_, actor_rng);
  actor_targ_ = actor_;
  q1_ = diffcore::init_params(q_spec_, q1_rng);
  q2_ = diffcore::init_params(q_spec_, q2_rng);
  q1_targ_ = q1_;
  q2_targ_ = q2_;
  if (constrained_) {
    if (cfg_.cost_limit <= 0.0)
      throw std::invalid_argument("constrained td3 requires cost_limit > 0");
    for (int i = 0; i < cfg_.n_cost_critics; ++i) {
      RngStream qc_rng(master_seed, i == 0 ? stream_id::kInitQCost1
                                           : stream_id::kInitQCost2);
      qc_.push_back(diffcore::init_params(q_spec_, qc_rng));
      qc_targ_.push_back(qc_.back());
    }
  }
}

Eigen::VectorXd Td3Agent::act_rollout(const Eigen::VectorXd& obs,
                                      RngStream& rng) {
  Eigen::VectorXd a = act_deterministic(obs);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    a(i) = std::clamp(a(i) + cfg_.sigma_expl * rng.normal(), -1.0, 1.0);
  return a;
}

Eigen::VectorXd Td3Agent::act_deterministic(const Eigen::VectorXd& obs) {
  return diffcore::fast_tanh(
             diffcore::forward(actor_, actor_spec_, obs).transpose())
      .row(0)
      .transpose();
}

void Td3Agent::on_episode_end(long env_step, double episode_cost) {
  if (constrained_) epoch_costs_.record(env_step, episode_cost);
}

Matrix Td3Agent::target_actions(const Matrix& s_next, RngStream& rng) const {
  Matrix mu =
      diffcore::fast_tanh(diffcore::forward(actor_targ_, actor_spec_, s_next));
  Matrix eps = rng.normal_matrix(mu.rows(), mu.cols()) * cfg_.sigma_smooth;
  eps = eps.cwiseMax(-cfg_.c_smooth).cwiseMin(cfg_.c_smooth);
  return (mu + eps).cwiseMax(-1.0).cwiseMin(1.0);
}

void Td3Agent::update(const replay::ReplayBuffer& buffer,
                      RngStream& buffer_rng, long env_step) {
  if (constrained_) {
    if (const auto j_c = epoch_costs_.mean_cost(env_step))
      beta_ = updated_beta(beta_, cfg_.cost_limit, *j_c, cfg_.lr_beta);
  }

  const auto b =
      buffer.sample_batch(static_cast<std::size_t>(cfg_.batch_size),
                          buffer_rng);

  // Critic phase with smoothed, clamped target actions.
  {
    const Matrix a_next = target_actions(b.s_next, update_noise_rng_);
    const Matrix sa_next = detail::concat_sa(b.s_next, a_next);
    const Eigen::VectorXd q1n =
        diffcore::forward(q1_targ_, q_spec_, sa_next).col(0);
    const Eigen::VectorXd q2n =
        diffcore::forward(q2_targ_, q_spec_, sa_next).col(0);
    const Eigen::VectorXd y =
        q_targets(b.r, b.d, q1n.cwiseMin(q2n), cfg_.gamma);

    Graph g;
    Var sa = g.constant(detail::concat_sa(b.s, b.a));
    Var q1 = diffcore::forward_on(g, q1_, q_spec_, sa);
    Var q2 = diffcore::forward_on(g, q2_, q_spec_, sa);
    Var loss = g.add(g.mean(g.square(g.sub(q1, g.constant(y)))),
                     g.mean(g.square(g.sub(q2, g.constant(y)))));
    if (constrained_) {
      Eigen::VectorXd qcn =
          diffcore::forward(qc_targ_[0], q_spec_, sa_next).col(0);
      if (qc_targ_.size() > 1)
        qcn = qcn.cwiseMin(
            diffcore::forward(qc_targ_[1], q_spec_, sa_next).col(0));
      const Eigen::VectorXd y_c = q_targets(b.c, b.d, qcn, cfg_.gamma);
      for (auto& qc : qc_) {
        Var qcv = diffcore::forward_on(g, qc, q_spec_, sa);
        loss = g.add(loss, g.mean(g.square(g.sub(qcv, g.constant(y_c)))));
      }
    }
    g.backward(loss, "td3 critic loss");
    diffcore::optimizer_step(q1_, opt_);
    diffcore::optimizer_step(q2_, opt_);
    for (auto& qc : qc_) diffcore::optimizer_step(qc, opt_);
  }
  critic_steps_ += 1;

  // Delayed actor step, ascending Q1 (minus the scaled cost critic when
  // constrained), followed by all target averages.
  if (critic_steps_ % cfg_.policy_delay == 0) {
    Graph g;
    Var pre = diffcore::forward_on(g, actor_, actor_spec_, g.constant(b.s));
    Var a = g.tanh(pre);
    Var sa = g.concat_cols(g.constant(b.s), a);
    Var objective = diffcore::forward_const(g, q1_, q_spec_, sa);
    if (constrained_) {
      Var qc = diffcore::forward_const(g, qc_[0], q_spec_, sa);
      if (qc_.size() > 1)
        qc = g.cwise_min(qc, diffcore::forward_const(g, qc_[1], q_spec_, sa));
      objective = g.sub(objective, g.scale(qc, beta_));
    }
    Var loss = g.neg(g.mean(objective));
    g.backward(loss, "td3 actor loss");
    diffcore::optimizer_step(actor_, opt_);
    actor_steps_ += 1;

    diffcore::polyak_update(actor_targ_, actor_, cfg_.rho);
    diffcore::polyak_update(q1_targ_, q1_, cfg_.rho);
    diffcore::polyak_update(q2_targ_, q2_, cfg_.rho);
    for (std::size_t i = 0; i < qc_.size(); ++i)
      diffcore::polyak_update(qc_targ_[i], qc_[i], cfg_.rho);
  }
  update_count_ += 1;
}

TdResiduals Td3Agent::td_residuals(const replay::ValidationSet& val,
                                   RngStream& rng) const {
  TdResiduals out;
  for (const auto& ep : val.episodes) {
    for (const auto& t : ep.transitions) {
      const double d = t.d ? 1.0 : 0.0;
      const Matrix a_next = target_actions(t.s_next.transpose(), rng);
      const Matrix sa_next = detail::concat_sa(t.s_next.transpose(), a_next);
      const double q1n = diffcore::forward(q1_targ_, q_spec_, sa_next)(0, 0);
      const double q2n = diffcore::forward(q2_targ_, q_spec_, sa_next)(0, 0);
      const double y = q_target_single(t.r, d, std::min(q1n, q2n), cfg_.gamma);
      const Matrix sa = detail::stack_sa(t.s, t.a);
      out.reward.push_back(diffcore::forward(q1_, q_spec_, sa)(0, 0) - y);
      out.reward.push_back(diffcore::forward(q2_, q_spec_, sa)(0, 0) - y);
      if (constrained_) {
        double qcn = diffcore::forward(qc_targ_[0], q_spec_, sa_next)(0, 0);
        if (qc_targ_.size() > 1)
          qcn = std::min(
              qcn, diffcore::forward(qc_targ_[1], q_spec_, sa_next)(0, 0));
        const double y_c = q_target_single(t.c, d, qcn, cfg_.gamma);
        for (const auto& qc : qc_)
          out.cost.push_back(diffcore::forward(qc, q_spec_, sa)(0, 0) - y_c);
      }
    }
  }
  return out;
}

double Td3Agent::q_policy_value(const Eigen::VectorXd& s,
                                const Eigen::VectorXd& a) const {
  const Matrix sa = detail::stack_sa(s, a);
  return std::min(diffcore::forward(q1_, q_spec_, sa)(0, 0),
                  diffcore::forward(q2_, q_spec_, sa)(0, 0));
}

void Td3Agent::reset_networks(RngStream& rng) {
  diffcore::reset_params(actor_, actor_spec_, rng);
  diffcore::reset_params(q1_, q_spec_, rng);
  diffcore::reset_params(q2_, q_spec_, rng);
  actor_targ_ = actor_;
  q1_targ_ = q1_;
  q2_targ_ = q2_;
  for (std::size_t i = 0; i < qc_.size(); ++i) {
    diffcore::reset_params(qc_[i], q_spec_, rng);
    qc_targ_[i] = qc_[i];
  }
  update_count_ = 0;
  critic_steps_ = 0;
  actor_steps_ = 0;
}

std::vector<std::pair<std::string, const diffcore::ParamStore*>>
Td3Agent::named_stores() const {
  std::vector<std::pair<std::string, const diffcore::ParamStore*>> out = {
      {"actor", &actor_},        {"actor_targ", &actor_targ_},
      {"q1", &q1_},              {"q2", &q2_},
      {"q1_targ", &q1_targ_},    {"q2_targ", &q2_targ_}};
  for (std::size_t i = 0; i < qc_.size(); ++i) {
    out.emplace_back("qc" + std::to_string(i + 1), &qc_[i]);
    out.emplace_back("qc" + std::to_string(i + 1) + "_targ", &qc_targ_[i]);
  }
  return out;
}

std::vector<std::pair<std::string, diffcore::ParamStore*>>
Td3Agent::named_stores_mut() {
  std::vector<std::pair<std::string, diffcore::ParamStore*>> out = {
      {"actor", &actor_},        {"actor_targ", &actor_targ_},
      {"q1", &q1_},              {"q2", &q2_},
      {"q1_targ", &q1_targ_},    {"q2_targ", &q2_targ_}};
  for (std::size_t i = 0; i < qc_.size(); ++i) {
    out.emplace_back("qc" + std::to_string(i + 1), &qc_[i]);
    out.emplace_back("qc" + std::to_string(i + 1) + "_targ", &qc_targ_[i]);
  }
  return out;
}

void Td3Agent::save_extra(std::ostream& out) const {
  out.write(reinterpret_cast<const char*>(&beta_), sizeof(beta_));
  out.write(reinterpret_cast<const char*>(&critic_steps_),
            sizeof(critic_steps_));
  out.write(reinterpret_cast<const char*>(&actor_steps_),
            sizeof(actor_steps_));
  const auto& entries = epoch_costs_.entries();
  const std::uint32_t n = static_cast<std::uint32_t>(entries.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const auto& [step, cost] : entries) {
    out.write(reinterpret_cast<const char*>(&step), sizeof(step));
    out.write(reinterpret_cast<const char*>(&cost), sizeof(cost));
  }
}

void Td3Agent::load_extra(std::istream& in) {
  in.read(reinterpret_cast<char*>(&beta_), sizeof(beta_));
  in.read(reinterpret_cast<char*>(&critic_steps_), sizeof(critic_steps_));
  in.read(reinterpret_cast<char*>(&actor_steps_), sizeof(actor_steps_));
  std::uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  std::deque<std::pair<long, double>> entries;
  for (std::uint32_t i = 0; i < n; ++i) {
    long step = 0;
    double cost = 0.0;
    in.read(reinterpret_cast<char*>(&step), sizeof(step));
    in.read(reinterpret_cast<char*>(&cost), sizeof(cost));
    entries.emplace_back(step, cost);
  }
  epoch_costs_.restore(std::move(entries));
}

}  // namespace oplab::algos
