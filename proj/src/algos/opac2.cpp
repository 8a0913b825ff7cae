#include "oplab/algos/opac2.hpp"

#include "oplab/algos/losses.hpp"
#include "util.hpp"

#include <ostream>
#include <istream>

namespace oplab::algos {

using diffcore::Graph;
using diffcore::Matrix;
using diffcore::Var;

namespace {

policy::PolicyConfig make_policy_config(const AgentConfig& cfg,
                                        const envs::EnvSpec& env) {
  policy::PolicyConfig pc;
  pc.obs_dim = env.obs_dim;
  pc.act_dim = env.act_dim;
  pc.hidden = cfg.hidden;
  pc.activation = cfg.activation.value_or(diffcore::Activation::kTanh);
  pc.state_dependent_std = cfg.state_dependent_std.value_or(false);
  return pc;
}

diffcore::MLPSpec critic_spec(const AgentConfig& cfg, int input_dim) {
  diffcore::MLPSpec s;
  s.input_dim = input_dim;
  s.hidden_dims = cfg.hidden;
  s.output_dim = 1;
  s.activation = cfg.activation.value_or(diffcore::Activation::kTanh);
  return s;
}

double resolved_target_entropy(const AgentConfig& cfg,
                               const envs::EnvSpec& env) {
  return cfg.target_entropy.value_or(-static_cast<double>(env.act_dim));
}

policy::GaussianPolicy make_policy(const AgentConfig& cfg,
                                   const envs::EnvSpec& env,
                                   std::uint64_t master_seed) {
  RngStream rng(master_seed, stream_id::kInitPolicy);
  return policy::GaussianPolicy(make_policy_config(cfg, env), rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// OPAC2
// ---------------------------------------------------------------------------

Opac2Agent::Opac2Agent(const AgentConfig& cfg, const envs::EnvSpec& env_spec,
                       std::uint64_t master_seed)
    : Agent(cfg, env_spec, master_seed),
      policy_(make_policy(cfg_, env_spec, master_seed)),
      q_spec_(critic_spec(cfg_, env_spec.obs_dim + env_spec.act_dim)),
      v_spec_(critic_spec(cfg_, env_spec.obs_dim)),
      temperature_(cfg_.alpha_init, resolved_target_entropy(cfg_, env_spec),
                   cfg_.lr_alpha) {
  RngStream q_rng(master_seed, stream_id::kInitQReward1);
  RngStream v_rng(master_seed, stream_id::kInitVReward);
  q_ = diffcore::init_params(q_spec_, q_rng);
  v_ = diffcore::init_params(v_spec_, v_rng);
  v_targ_ = v_;
}

Eigen::VectorXd Opac2Agent::act_rollout(const Eigen::VectorXd& obs,
                                        RngStream& rng) {
  const auto head = policy_.head(obs.transpose());
  return policy_.sample(head, rng).action.row(0).transpose();
}

Eigen::VectorXd Opac2Agent::act_deterministic(const Eigen::VectorXd& obs) {
  return policy_.deterministic_action(obs.transpose()).row(0).transpose();
}

void Opac2Agent::update(const replay::ReplayBuffer& buffer,
                        RngStream& buffer_rng, long) {
  const auto n = static_cast<std::size_t>(cfg_.batch_size);
  if (cfg_.independent_batches) {
    const auto bq = buffer.sample_batch(n, buffer_rng);
    const auto bv = buffer.sample_batch(n, buffer_rng);
    const auto bpi = buffer.sample_batch(n, buffer_rng);
    update_from_batches(bq, bv, bpi);
  } else {
    const auto b = buffer.sample_batch(n, buffer_rng);
    update_from_batches(b, b, b);
  }
}

void Opac2Agent::update_from_batches(const replay::Batch& q_batch,
                                     const replay::Batch& v_batch,
                                     const replay::Batch& pi_batch) {
  const bool shared = &v_batch == &pi_batch;
  const double alpha = temperature_.alpha();

  // Critic: regress Q(s,a) to r + gamma(1-d) V_targ(s').
  {
    const Eigen::VectorXd v_next =
        diffcore::forward(v_targ_, v_spec_, q_batch.s_next).col(0);
    const Eigen::VectorXd y =
        q_targets(q_batch.r, q_batch.d, v_next, cfg_.gamma);
    Graph g;
    Var q = diffcore::forward_on(
        g, q_, q_spec_, g.constant(detail::concat_sa(q_batch.s, q_batch.a)));
    Var loss = g.mean(g.square(g.sub(q, g.constant(y))));
    g.backward(loss, "opac2 Q loss");
    diffcore::optimizer_step(q_, opt_);
  }

  // Value: regress V(s) to the fresh critic at a squashed policy action
  // (entropy-augmented in max-entropy mode).
  const auto head_v = policy_.head(v_batch.s);
  const auto sample_v = policy_.sample_with_noise(
      head_v, update_noise_rng_.normal_matrix(v_batch.size(),
                                              env_spec_.act_dim));
  const Eigen::VectorXd q_at_pi =
      diffcore::forward(q_, q_spec_,
                        detail::concat_sa(v_batch.s, sample_v.action))
          .col(0);
  {
    Eigen::VectorXd v_target = q_at_pi;
    if (cfg_.entropy_mode == EntropyMode::kMaxEntropy)
      v_target -= alpha * sample_v.log_prob;
    Graph g;
    Var v = diffcore::forward_on(g, v_, v_spec_, g.constant(v_batch.s));
    Var loss = g.mean(g.square(g.sub(v, g.constant(v_target))));
    g.backward(loss, "opac2 V loss");
    diffcore::optimizer_step(v_, opt_);
  }

  // Advantage at the policy action, then the policy step.
  Eigen::VectorXd adv_logp;  // log pi of the advantage action, for alpha
  {
    Graph g;
    auto head_pi = policy_.head_on(g, g.constant(pi_batch.s), true);
    Matrix u_pi;
    Eigen::VectorXd a_hat;
    if (shared) {
      const Eigen::VectorXd v_new =
          diffcore::forward(v_, v_spec_, v_batch.s).col(0);
      a_hat = normalize_advantages(advantage(q_at_pi, v_new));
      u_pi = sample_v.pre_squash;
      adv_logp = sample_v.log_prob;
    } else {
      const auto head2 = policy_.head(pi_batch.s);
      const auto sample2 = policy_.sample_with_noise(
          head2, update_noise_rng_.normal_matrix(pi_batch.size(),
                                                 env_spec_.act_dim));
      const Eigen::VectorXd q2 =
          diffcore::forward(q_, q_spec_,
                            detail::concat_sa(pi_batch.s, sample2.action))
              .col(0);
      const Eigen::VectorXd v2 =
          diffcore::forward(v_, v_spec_, pi_batch.s).col(0);
      a_hat = normalize_advantages(advantage(q2, v2));
      u_pi = sample2.pre_squash;
      adv_logp = sample2.log_prob;
    }
    Var logp_pi = policy_.log_prob_on(g, head_pi, g.constant(u_pi));
    Var score = g.mul(g.constant(a_hat), logp_pi);
    Var loss;
    if (cfg_.entropy_mode == EntropyMode::kBonus) {
      Var u_rp = policy_.reparam_pre_squash(
          g, head_pi, update_noise_rng_.normal_matrix(pi_batch.size(),
                                                      env_spec_.act_dim));
      Var logp_rp = policy_.log_prob_on(g, head_pi, u_rp);
      loss = g.mean(g.sub(g.scale(logp_rp, alpha), score));
    } else {
      loss = g.mean(g.neg(score));
    }
    g.backward(loss, "opac2 policy loss");
    diffcore::optimizer_step(policy_.store(), opt_);
  }

  if (cfg_.entropy_mode != EntropyMode::kNone) temperature_.update(adv_logp);

  update_count_ += 1;
  if (update_count_ % cfg_.target_update_interval == 0)
    diffcore::polyak_update(v_targ_, v_, cfg_.rho);
}

TdResiduals Opac2Agent::td_residuals(const replay::ValidationSet& val,
                                     RngStream&) const {
  TdResiduals out;
  for (const auto& ep : val.episodes) {
    for (const auto& t : ep.transitions) {
      const double v_next =
          diffcore::forward(v_targ_, v_spec_, t.s_next)(0);
      const double y =
          q_target_single(t.r, t.d ? 1.0 : 0.0, v_next, cfg_.gamma);
      const double q =
          diffcore::forward(q_, q_spec_, detail::stack_sa(t.s, t.a))(0, 0);
      out.reward.push_back(q - y);
    }
  }
  return out;
}

double Opac2Agent::q_policy_value(const Eigen::VectorXd& s,
                                  const Eigen::VectorXd& a) const {
  return diffcore::forward(q_, q_spec_, detail::stack_sa(s, a))(0, 0);
}

void Opac2Agent::reset_networks(RngStream& rng) {
  policy_.reset(rng);
  diffcore::reset_params(q_, q_spec_, rng);
  diffcore::reset_params(v_, v_spec_, rng);
  v_targ_ = v_;
  update_count_ = 0;
}

std::vector<std::pair<std::string, const diffcore::ParamStore*>>
Opac2Agent::named_stores() const {
  return {{"policy", &policy_.store()},
          {"q_r", &q_},
          {"v_r", &v_},
          {"v_r_targ", &v_targ_},
          {"temperature", &temperature_.store()}};
}

std::vector<std::pair<std::string, diffcore::ParamStore*>>
Opac2Agent::named_stores_mut() {
  return {{"policy", &policy_.store()},
          {"q_r", &q_},
          {"v_r", &v_},
          {"v_r_targ", &v_targ_},
          {"temperature", &temperature_.store()}};
}

// ---------------------------------------------------------------------------
// C-OPAC2
// ---------------------------------------------------------------------------

Copac2Agent::Copac2Agent(const AgentConfig& cfg, const envs::EnvSpec& env_spec,
                         std::uint64_t master_seed)
    : Agent(cfg, env_spec, master_seed),
      policy_(make_policy(cfg_, env_spec, master_seed)),
      q_spec_(critic_spec(cfg_, env_spec.obs_dim + env_spec.act_dim)),
      v_spec_(critic_spec(cfg_, env_spec.obs_dim)),
      temperature_(cfg_.alpha_init, resolved_target_entropy(cfg_, env_spec),
                   cfg_.lr_alpha),
      beta_(cfg_.beta_init),
      epoch_costs_(cfg_.beta_epoch_len) {
  if (cfg_.cost_limit <= 0.0)
    throw std::invalid_argument("copac2 requires cost_limit > 0");
  RngStream qr_rng(master_seed, stream_id::kInitQReward1);
  RngStream qc_rng(master_seed, stream_id::kInitQCost1);
  RngStream vr_rng(master_seed, stream_id::kInitVReward);
  RngStream vc_rng(master_seed, stream_id::kInitVCost);
  q_r_ = diffcore::init_params(q_spec_, qr_rng);
  q_c_ = diffcore::init_params(q_spec_, qc_rng);
  v_r_ = diffcore::init_params(v_spec_, vr_rng);
  v_c_ = diffcore::init_params(v_spec_, vc_rng);
  v_r_targ_ = v_r_;
  v_c_targ_ = v_c_;
}

Eigen::VectorXd Copac2Agent::act_rollout(const Eigen::VectorXd& obs,
                                         RngStream& rng) {
  const auto head = policy_.head(obs.transpose());
  return policy_.sample(head, rng).action.row(0).transpose();
}

Eigen::VectorXd Copac2Agent::act_deterministic(const Eigen::VectorXd& obs) {
  return policy_.deterministic_action(obs.transpose()).row(0).transpose();
}

void Copac2Agent::on_episode_end(long env_step, double episode_cost) {
  epoch_costs_.record(env_step, episode_cost);
}

void Copac2Agent::update(const replay::ReplayBuffer& buffer,
                         RngStream& buffer_rng, long env_step) {
  // Dual step first: beta tracks how far the recent-epoch episode cost sits
  // from the limit.
  if (const auto j_c = epoch_costs_.mean_cost(env_step))
    beta_ = updated_beta(beta_, cfg_.cost_limit, *j_c, cfg_.lr_beta);

  const auto n = static_cast<std::size_t>(cfg_.batch_size);
  replay::Batch shared_batch;
  const replay::Batch* bq;
  const replay::Batch* bv;
  const replay::Batch* bpi;
  replay::Batch ind_q, ind_v, ind_pi;
  if (cfg_.independent_batches) {
    ind_q = buffer.sample_batch(n, buffer_rng);
    ind_v = buffer.sample_batch(n, buffer_rng);
    ind_pi = buffer.sample_batch(n, buffer_rng);
    bq = &ind_q;
    bv = &ind_v;
    bpi = &ind_pi;
  } else {
    shared_batch = buffer.sample_batch(n, buffer_rng);
    bq = bv = bpi = &shared_batch;
  }
  const bool shared = bv == bpi;
  const double alpha = temperature_.alpha();

  // Critics: both regressions share one sweep; their parameter sets are
  // disjoint so the gradients do not interact.
  {
    const Eigen::VectorXd vr_next =
        diffcore::forward(v_r_targ_, v_spec_, bq->s_next).col(0);
    const Eigen::VectorXd vc_next =
        diffcore::forward(v_c_targ_, v_spec_, bq->s_next).col(0);
    const Eigen::VectorXd y_r = q_targets(bq->r, bq->d, vr_next, cfg_.gamma);
    const Eigen::VectorXd y_c = q_targets(bq->c, bq->d, vc_next, cfg_.gamma);
    Graph g;
    Var sa = g.constant(detail::concat_sa(bq->s, bq->a));
    Var qr = diffcore::forward_on(g, q_r_, q_spec_, sa);
    Var qc = diffcore::forward_on(g, q_c_, q_spec_, sa);
    Var loss = g.add(g.mean(g.square(g.sub(qr, g.constant(y_r)))),
                     g.mean(g.square(g.sub(qc, g.constant(y_c)))));
    g.backward(loss, "copac2 Q loss");
    diffcore::optimizer_step(q_r_, opt_);
    diffcore::optimizer_step(q_c_, opt_);
  }

  // Values at a squashed policy action; the cost value regresses to the cost
  // critic.
  const auto head_v = policy_.head(bv->s);
  const auto sample_v = policy_.sample_with_noise(
      head_v,
      update_noise_rng_.normal_matrix(bv->size(), env_spec_.act_dim));
  const Matrix sa_pi = detail::concat_sa(bv->s, sample_v.action);
  const Eigen::VectorXd qr_at_pi =
      diffcore::forward(q_r_, q_spec_, sa_pi).col(0);
  const Eigen::VectorXd qc_at_pi =
      diffcore::forward(q_c_, q_spec_, sa_pi).col(0);
  {
    Eigen::VectorXd vr_target = qr_at_pi;
    if (cfg_.entropy_mode == EntropyMode::kMaxEntropy)
      vr_target -= alpha * sample_v.log_prob;
    Graph g;
    Var obs = g.constant(bv->s);
    Var vr = diffcore::forward_on(g, v_r_, v_spec_, obs);
    Var vc = diffcore::forward_on(g, v_c_, v_spec_, obs);
    Var loss = g.add(g.mean(g.square(g.sub(vr, g.constant(vr_target)))),
                     g.mean(g.square(g.sub(vc, g.constant(qc_at_pi)))));
    g.backward(loss, "copac2 V loss");
    diffcore::optimizer_step(v_r_, opt_);
    diffcore::optimizer_step(v_c_, opt_);
  }

  // Combined advantage, normalized after the beta tradeoff, then the policy
  // and temperature steps.
  Eigen::VectorXd adv_logp;
  {
    Graph g;
    auto head_pi = policy_.head_on(g, g.constant(bpi->s), true);
    Matrix u_pi;
    Eigen::VectorXd a_hat;
    if (shared) {
      const Eigen::VectorXd vr_new =
          diffcore::forward(v_r_, v_spec_, bv->s).col(0);
      const Eigen::VectorXd vc_new =
          diffcore::forward(v_c_, v_spec_, bv->s).col(0);
      a_hat = normalize_advantages(
          copac2_advantage(qr_at_pi, vr_new, qc_at_pi, vc_new, beta_));
      u_pi = sample_v.pre_squash;
      adv_logp = sample_v.log_prob;
    } else {
      const auto head2 = policy_.head(bpi->s);
      const auto sample2 = policy_.sample_with_noise(
          head2, update_noise_rng_.normal_matrix(bpi->size(),
                                                 env_spec_.act_dim));
      const Matrix sa2 = detail::concat_sa(bpi->s, sample2.action);
      a_hat = normalize_advantages(copac2_advantage(
          diffcore::forward(q_r_, q_spec_, sa2).col(0),
          diffcore::forward(v_r_, v_spec_, bpi->s).col(0),
          diffcore::forward(q_c_, q_spec_, sa2).col(0),
          diffcore::forward(v_c_, v_spec_, bpi->s).col(0), beta_));
      u_pi = sample2.pre_squash;
      adv_logp = sample2.log_prob;
    }
    Var logp_pi = policy_.log_prob_on(g, head_pi, g.constant(u_pi));
    Var score = g.mul(g.constant(a_hat), logp_pi);
    Var loss;
    if (cfg_.entropy_mode == EntropyMode::kBonus) {
      Var u_rp = policy_.reparam_pre_squash(
          g, head_pi, update_noise_rng_.normal_matrix(bpi->size(),
                                                      env_spec_.act_dim));
      Var logp_rp = policy_.log_prob_on(g, head_pi, u_rp);
      loss = g.mean(g.sub(g.scale(logp_rp, alpha), score));
    } else {
      loss = g.mean(g.neg(score));
    }
    g.backward(loss, "copac2 policy loss");
    diffcore::optimizer_step(policy_.store(), opt_);
  }

  if (cfg_.entropy_mode != EntropyMode::kNone) temperature_.update(adv_logp);

  update_count_ += 1;
  if (update_count_ % cfg_.target_update_interval == 0) {
    diffcore::polyak_update(v_r_targ_, v_r_, cfg_.rho);
    diffcore::polyak_update(v_c_targ_, v_c_, cfg_.rho);
  }
}

TdResiduals Copac2Agent::td_residuals(const replay::ValidationSet& val,
                                      RngStream&) const {
  TdResiduals out;
  for (const auto& ep : val.episodes) {
    for (const auto& t : ep.transitions) {
      const double d = t.d ? 1.0 : 0.0;
      const Matrix sa = detail::stack_sa(t.s, t.a);
      const double vr_next =
          diffcore::forward(v_r_targ_, v_spec_, t.s_next)(0);
      const double qr = diffcore::forward(q_r_, q_spec_, sa)(0, 0);
      out.reward.push_back(qr - q_target_single(t.r, d, vr_next, cfg_.gamma));
      const double vc_next =
          diffcore::forward(v_c_targ_, v_spec_, t.s_next)(0);
      const double qc = diffcore::forward(q_c_, q_spec_, sa)(0, 0);
      out.cost.push_back(qc - q_target_single(t.c, d, vc_next, cfg_.gamma));
    }
  }
  return out;
}

double Copac2Agent::q_policy_value(const Eigen::VectorXd& s,
                                   const Eigen::VectorXd& a) const {
  return diffcore::forward(q_r_, q_spec_, detail::stack_sa(s, a))(0, 0);
}

void Copac2Agent::reset_networks(RngStream& rng) {
  policy_.reset(rng);
  diffcore::reset_params(q_r_, q_spec_, rng);
  diffcore::reset_params(q_c_, q_spec_, rng);
  diffcore::reset_params(v_r_, v_spec_, rng);
  diffcore::reset_params(v_c_, v_spec_, rng);
  v_r_targ_ = v_r_;
  v_c_targ_ = v_c_;
  update_count_ = 0;
  // beta and the temperature survive resets.
}

std::vector<std::pair<std::string, const diffcore::ParamStore*>>
Copac2Agent::named_stores() const {
  return {{"policy", &policy_.store()},
          {"q_r", &q_r_},
          {"q_c", &q_c_},
          {"v_r", &v_r_},
          {"v_c", &v_c_},
          {"v_r_targ", &v_r_targ_},
          {"v_c_targ", &v_c_targ_},
          {"temperature", &temperature_.store()}};
}

std::vector<std::pair<std::string, diffcore::ParamStore*>>
Copac2Agent::named_stores_mut() {
  return {{"policy", &policy_.store()},
          {"q_r", &q_r_},
          {"q_c", &q_c_},
          {"v_r", &v_r_},
          {"v_c", &v_c_},
          {"v_r_targ", &v_r_targ_},
          {"v_c_targ", &v_c_targ_},
          {"temperature", &temperature_.store()}};
}

void Copac2Agent::save_extra(std::ostream& out) const {
  out.write(reinterpret_cast<const char*>(&beta_), sizeof(beta_));
  const auto& entries = epoch_costs_.entries();
  const std::uint32_t n = static_cast<std::uint32_t>(entries.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const auto& [step, cost] : entries) {
    out.write(reinterpret_cast<const char*>(&step), sizeof(step));
    out.write(reinterpret_cast<const char*>(&cost), sizeof(cost));
  }
}

void Copac2Agent::load_extra(std::istream& in) {
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
