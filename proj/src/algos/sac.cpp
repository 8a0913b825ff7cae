#include "oplab/algos/sac.hpp"

#include "oplab/algos/losses.hpp"
#include "util.hpp"

#include <istream>
#include <ostream>

namespace oplab::algos {

using diffcore::Graph;
using diffcore::Matrix;
using diffcore::Var;

namespace {

policy::PolicyConfig sac_policy_config(const AgentConfig& cfg,
                                       const envs::EnvSpec& env) {
  policy::PolicyConfig pc;
  pc.obs_dim = env.obs_dim;
  pc.act_dim = env.act_dim;
  pc.hidden = cfg.hidden;
  pc.activation = cfg.activation.value_or(diffcore::Activation::kRelu);
  pc.state_dependent_std = cfg.state_dependent_std.value_or(true);
  return pc;
}

policy::GaussianPolicy make_policy(const AgentConfig& cfg,
                                   const envs::EnvSpec& env,
                                   std::uint64_t master_seed) {
  RngStream rng(master_seed, stream_id::kInitPolicy);
  return policy::GaussianPolicy(sac_policy_config(cfg, env), rng);
}

diffcore::MLPSpec sac_q_spec(const AgentConfig& cfg,
                             const envs::EnvSpec& env) {
  diffcore::MLPSpec s;
  s.input_dim = env.obs_dim + env.act_dim;
  s.hidden_dims = cfg.hidden;
  s.output_dim = 1;
  s.activation = cfg.activation.value_or(diffcore::Activation::kRelu);
  return s;
}

}  // namespace

SacAgent::SacAgent(const AgentConfig& cfg, const envs::EnvSpec& env_spec,
                   std::uint64_t master_seed, bool constrained)
    : Agent(cfg, env_spec, master_seed),
      constrained_(constrained),
      policy_(make_policy(cfg_, env_spec, master_seed)),
      q_spec_(sac_q_spec(cfg_, env_spec)),
      temperature_(cfg_.alpha_init,
                   cfg_.target_entropy.value_or(
                       -static_cast<double>(env_spec.act_dim)),
                   cfg_.lr_alpha),
      beta_(cfg_.beta_init),
      epoch_costs_(cfg_.beta_epoch_len) {
  // Twin critics start from distinct seeds.
  RngStream q1_rng(master_seed, stream_id::kInitQReward1);
  RngStream q2_rng(master_seed, stream_id::kInitQReward2);
  q1_ = diffcore::init_params(q_spec_, q1_rng);
  q2_ = diffcore::init_params(q_spec_, q2_rng);
  q1_targ_ = q1_;
  q2_targ_ = q2_;
  if (constrained_) {
    if (cfg_.cost_limit <= 0.0)
      throw std::invalid_argument("constrained sac requires cost_limit > 0");
    for (int i = 0; i < cfg_.n_cost_critics; ++i) {
      RngStream qc_rng(master_seed, i == 0 ? stream_id::kInitQCost1
                                           : stream_id::kInitQCost2);
      qc_.push_back(diffcore::init_params(q_spec_, qc_rng));
      qc_targ_.push_back(qc_.back());
    }
  }
}

Eigen::VectorXd SacAgent::act_rollout(const Eigen::VectorXd& obs,
                                      RngStream& rng) {
  const auto head = policy_.head(obs.transpose());
  return policy_.sample(head, rng).action.row(0).transpose();
}

Eigen::VectorXd SacAgent::act_deterministic(const Eigen::VectorXd& obs) {
  return policy_.deterministic_action(obs.transpose()).row(0).transpose();
}

void SacAgent::on_episode_end(long env_step, double episode_cost) {
  if (constrained_) epoch_costs_.record(env_step, episode_cost);
}

void SacAgent::update(const replay::ReplayBuffer& buffer,
                      RngStream& buffer_rng, long env_step) {
  if (constrained_) {
    if (const auto j_c = epoch_costs_.mean_cost(env_step))
      beta_ = updated_beta(beta_, cfg_.cost_limit, *j_c, cfg_.lr_beta);
  }

  const auto b =
      buffer.sample_batch(static_cast<std::size_t>(cfg_.batch_size),
                          buffer_rng);
  const double alpha = temperature_.alpha();

  // Critic phase: entropy-augmented clipped double-Q backup; cost critics
  // (when present) regress to the plain cost backup with the same next
  // action.
  {
    const auto head_next = policy_.head(b.s_next);
    const auto next_sample = policy_.sample_with_noise(
        head_next,
        update_noise_rng_.normal_matrix(b.size(), env_spec_.act_dim));
    const Matrix sa_next = detail::concat_sa(b.s_next, next_sample.action);
    const Eigen::VectorXd q1_next =
        diffcore::forward(q1_targ_, q_spec_, sa_next).col(0);
    const Eigen::VectorXd q2_next =
        diffcore::forward(q2_targ_, q_spec_, sa_next).col(0);
    const Eigen::VectorXd y =
        sac_q_targets(b.r, b.d, q1_next.cwiseMin(q2_next),
                      next_sample.log_prob, alpha, cfg_.gamma);

    Graph g;
    Var sa = g.constant(detail::concat_sa(b.s, b.a));
    Var q1 = diffcore::forward_on(g, q1_, q_spec_, sa);
    Var q2 = diffcore::forward_on(g, q2_, q_spec_, sa);
    Var loss = g.add(g.mean(g.square(g.sub(q1, g.constant(y)))),
                     g.mean(g.square(g.sub(q2, g.constant(y)))));
    if (constrained_) {
      Eigen::VectorXd qc_next =
          diffcore::forward(qc_targ_[0], q_spec_, sa_next).col(0);
      if (qc_targ_.size() > 1)
        qc_next = qc_next.cwiseMin(
            diffcore::forward(qc_targ_[1], q_spec_, sa_next).col(0));
      const Eigen::VectorXd y_c = q_targets(b.c, b.d, qc_next, cfg_.gamma);
      for (auto& qc : qc_) {
        Var qcv = diffcore::forward_on(g, qc, q_spec_, sa);
        loss = g.add(loss, g.mean(g.square(g.sub(qcv, g.constant(y_c)))));
      }
    }
    g.backward(loss, "sac Q loss");
    diffcore::optimizer_step(q1_, opt_);
    diffcore::optimizer_step(q2_, opt_);
    for (auto& qc : qc_) diffcore::optimizer_step(qc, opt_);
  }

  // Policy phase: reparameterized action through the (frozen) critics.
  Eigen::VectorXd rp_logp;
  {
    Graph g;
    auto head = policy_.head_on(g, g.constant(b.s), true);
    Var u = policy_.reparam_pre_squash(
        g, head,
        update_noise_rng_.normal_matrix(b.size(), env_spec_.act_dim));
    Var a = g.tanh(u);
    Var logp = policy_.log_prob_on(g, head, u);
    Var sa = g.concat_cols(g.constant(b.s), a);
    Var q1 = diffcore::forward_const(g, q1_, q_spec_, sa);
    Var q2 = diffcore::forward_const(g, q2_, q_spec_, sa);
    Var objective = g.cwise_min(q1, q2);
    if (constrained_) {
      Var qc = diffcore::forward_const(g, qc_[0], q_spec_, sa);
      if (qc_.size() > 1)
        qc = g.cwise_min(qc, diffcore::forward_const(g, qc_[1], q_spec_, sa));
      objective = g.sub(objective, g.scale(qc, beta_));
    }
    Var loss = g.mean(g.sub(g.scale(logp, alpha), objective));
    g.backward(loss, "sac policy loss");
    diffcore::optimizer_step(policy_.store(), opt_);
    rp_logp = g.value(logp).col(0);
  }

  temperature_.update(rp_logp);

  update_count_ += 1;
  if (update_count_ % cfg_.target_update_interval == 0) {
    diffcore::polyak_update(q1_targ_, q1_, cfg_.rho);
    diffcore::polyak_update(q2_targ_, q2_, cfg_.rho);
    for (std::size_t i = 0; i < qc_.size(); ++i)
      diffcore::polyak_update(qc_targ_[i], qc_[i], cfg_.rho);
  }
}

TdResiduals SacAgent::td_residuals(const replay::ValidationSet& val,
                                   RngStream& rng) const {
  TdResiduals out;
  const double alpha = temperature_.alpha();
  for (const auto& ep : val.episodes) {
    for (const auto& t : ep.transitions) {
      const double d = t.d ? 1.0 : 0.0;
      const auto head_next = policy_.head(t.s_next.transpose());
      const auto next_sample = policy_.sample(head_next, rng);
      const Matrix sa_next = detail::concat_sa(
          t.s_next.transpose(), next_sample.action);
      const double q1n = diffcore::forward(q1_targ_, q_spec_, sa_next)(0, 0);
      const double q2n = diffcore::forward(q2_targ_, q_spec_, sa_next)(0, 0);
      const double y =
          t.r + cfg_.gamma * (1.0 - d) *
                    (std::min(q1n, q2n) - alpha * next_sample.log_prob(0));
      const Matrix sa = detail::stack_sa(t.s, t.a);
      out.reward.push_back(diffcore::forward(q1_, q_spec_, sa)(0, 0) - y);
      out.reward.push_back(diffcore::forward(q2_, q_spec_, sa)(0, 0) - y);
      if (constrained_) {
        double qcn = diffcore::forward(qc_targ_[0], q_spec_, sa_next)(0, 0);
        if (qc_targ_.size() > 1)
          qcn = std::min(
              qcn, diffcore::forward(qc_targ_[1], q_spec_, sa_next)(0, 0));
        const double y_c = t.c + cfg_.gamma * (1.0 - d) * qcn;
        for (const auto& qc : qc_)
          out.cost.push_back(diffcore::forward(qc, q_spec_, sa)(0, 0) - y_c);
      }
    }
  }
  return out;
}

double SacAgent::q_policy_value(const Eigen::VectorXd& s,
                                const Eigen::VectorXd& a) const {
  const Matrix sa = detail::stack_sa(s, a);
  return std::min(diffcore::forward(q1_, q_spec_, sa)(0, 0),
                  diffcore::forward(q2_, q_spec_, sa)(0, 0));
}

void SacAgent::reset_networks(RngStream& rng) {
  policy_.reset(rng);
  diffcore::reset_params(q1_, q_spec_, rng);
  diffcore::reset_params(q2_, q_spec_, rng);
  q1_targ_ = q1_;
  q2_targ_ = q2_;
  for (std::size_t i = 0; i < qc_.size(); ++i) {
    diffcore::reset_params(qc_[i], q_spec_, rng);
    qc_targ_[i] = qc_[i];
  }
  update_count_ = 0;
}

std::vector<std::pair<std::string, const diffcore::ParamStore*>>
SacAgent::named_stores() const {
  std::vector<std::pair<std::string, const diffcore::ParamStore*>> out = {
      {"policy", &policy_.store()}, {"q1", &q1_},
      {"q2", &q2_},                 {"q1_targ", &q1_targ_},
      {"q2_targ", &q2_targ_},       {"temperature", &temperature_.store()}};
  for (std::size_t i = 0; i < qc_.size(); ++i) {
    out.emplace_back("qc" + std::to_string(i + 1), &qc_[i]);
    out.emplace_back("qc" + std::to_string(i + 1) + "_targ", &qc_targ_[i]);
  }
  return out;
}

std::vector<std::pair<std::string, diffcore::ParamStore*>>
SacAgent::named_stores_mut() {
  std::vector<std::pair<std::string, diffcore::ParamStore*>> out = {
      {"policy", &policy_.store()}, {"q1", &q1_},
      {"q2", &q2_},                 {"q1_targ", &q1_targ_},
      {"q2_targ", &q2_targ_},       {"temperature", &temperature_.store()}};
  for (std::size_t i = 0; i < qc_.size(); ++i) {
    out.emplace_back("qc" + std::to_string(i + 1), &qc_[i]);
    out.emplace_back("qc" + std::to_string(i + 1) + "_targ", &qc_targ_[i]);
  }
  return out;
}

void SacAgent::save_extra(std::ostream& out) const {
  out.write(reinterpret_cast<const char*>(&beta_), sizeof(beta_));
  const auto& entries = epoch_costs_.entries();
  const std::uint32_t n = static_cast<std::uint32_t>(entries.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const auto& [step, cost] : entries) {
    out.write(reinterpret_cast<const char*>(&step), sizeof(step));
    out.write(reinterpret_cast<const char*>(&cost), sizeof(cost));
  }
}

void SacAgent::load_extra(std::istream& in) {
  in.read(reinterpret_cast<char*>(&beta_), sizeof(beta_));
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
