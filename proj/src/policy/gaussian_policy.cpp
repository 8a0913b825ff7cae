#include "oplab/policy/gaussian_policy.hpp"

#include "oplab/diffcore/mathutil.hpp"

#include <cmath>

namespace oplab::policy {

namespace {
constexpr double kLogTwoPi = 1.8378770664093453;  // ln(2*pi)
constexpr double kLogTwo = 0.6931471805599453;
}  // namespace

GaussianPolicy::GaussianPolicy(const PolicyConfig& cfg, RngStream& init_rng)
    : cfg_(cfg) {
  net_spec_.input_dim = cfg.obs_dim;
  net_spec_.hidden_dims = cfg.hidden;
  net_spec_.output_dim = cfg.state_dependent_std ? 2 * cfg.act_dim : cfg.act_dim;
  net_spec_.activation = cfg.activation;
  store_ = diffcore::init_params(net_spec_, init_rng);
  if (!cfg.state_dependent_std)
    store_.add("log_std",
               Matrix::Constant(1, cfg.act_dim, cfg.log_std_init));
}

PolicyHead GaussianPolicy::head(const Matrix& obs) const {
  Matrix out = diffcore::forward(store_, net_spec_, obs);
  PolicyHead h;
  if (cfg_.state_dependent_std) {
    h.mean = out.leftCols(cfg_.act_dim);
    h.log_std = out.rightCols(cfg_.act_dim);
  } else {
    h.mean = out;
    h.log_std = store_.at("log_std").value.replicate(obs.rows(), 1);
  }
  h.log_std = h.log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  return h;
}

SquashedSample GaussianPolicy::sample(const PolicyHead& head,
                                      RngStream& rng) const {
  return sample_with_noise(head, rng.normal_matrix(head.mean.rows(),
                                                   head.mean.cols()));
}

SquashedSample GaussianPolicy::sample_with_noise(const PolicyHead& head,
                                                 const Matrix& xi) const {
  SquashedSample s;
  s.pre_squash =
      head.mean + head.log_std.array().exp().matrix().cwiseProduct(xi);
  s.action = diffcore::fast_tanh(s.pre_squash);
  s.log_prob = log_prob(head, s.pre_squash);
  return s;
}

Eigen::VectorXd GaussianPolicy::log_prob(const PolicyHead& head,
                                         const Matrix& u) const {
  const auto z = (u - head.mean).array() * (-head.log_std).array().exp();
  Eigen::VectorXd normal =
      (-0.5 * z.square() - head.log_std.array() - 0.5 * kLogTwoPi)
          .rowwise()
          .sum()
          .matrix();
  return normal - tanh_log_jacobian(u);
}

Matrix GaussianPolicy::deterministic_action(const Matrix& obs) const {
  return diffcore::fast_tanh(head(obs).mean);
}

GaussianPolicy::HeadVars GaussianPolicy::head_on(Graph& g, Var obs,
                                                 bool bind_params) {
  Var out = diffcore::forward_on(g, store_, net_spec_, obs, bind_params);
  HeadVars h;
  if (cfg_.state_dependent_std) {
    h.mean = g.slice_cols(out, 0, cfg_.act_dim);
    h.log_std = g.clamp(g.slice_cols(out, cfg_.act_dim, cfg_.act_dim),
                        kLogStdMin, kLogStdMax);
  } else {
    h.mean = out;
    Var raw = bind_params ? g.param(store_, "log_std")
                          : g.constant(store_.at("log_std").value);
    h.log_std = g.broadcast_row(g.clamp(raw, kLogStdMin, kLogStdMax),
                                g.value(obs).rows());
  }
  return h;
}

Var GaussianPolicy::reparam_pre_squash(Graph& g, const HeadVars& head,
                                       const Matrix& xi) {
  return g.add(head.mean, g.mul(g.exp(head.log_std), g.constant(xi)));
}

Var GaussianPolicy::log_prob_on(Graph& g, const HeadVars& head, Var u) {
  Var z = g.mul(g.sub(u, head.mean), g.exp(g.neg(head.log_std)));
  Var normal = g.row_sum(g.sub(
      g.add_scalar(g.scale(g.square(z), -0.5), -0.5 * kLogTwoPi),
      head.log_std));
  return g.sub(normal, tanh_log_jacobian(g, u));
}

void GaussianPolicy::reset(RngStream& rng) {
  diffcore::reset_params(store_, net_spec_, rng);
  if (!cfg_.state_dependent_std)
    store_.at("log_std").value.setConstant(cfg_.log_std_init);
}

Var tanh_log_jacobian(Graph& g, Var u) {
  // 2 * (ln 2 - u - softplus(-2u)) per dimension.
  Var per_dim = g.scale(
      g.sub(g.add_scalar(g.neg(u), kLogTwo), g.softplus(g.scale(u, -2.0))),
      2.0);
  return g.row_sum(per_dim);
}

Eigen::VectorXd tanh_log_jacobian(const Matrix& u) {
  const auto softplus = [](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  };
  Matrix per_dim =
      2.0 * (kLogTwo - u.array() -
             u.unaryExpr([&](double x) { return softplus(-2.0 * x); }).array());
  return per_dim.rowwise().sum();
}

Temperature::Temperature(double alpha_init, double target_entropy,
                         double learning_rate)
    : target_entropy_(target_entropy) {
  opt_.learning_rate = learning_rate;
  store_.add("log_alpha", Matrix::Constant(1, 1, std::log(alpha_init)));
}

void Temperature::update(const Eigen::VectorXd& batch_log_probs) {
  Graph g;
  Var log_alpha = g.param(store_, "log_alpha");
  Var alpha = g.exp(log_alpha);
  const double mean_term = batch_log_probs.mean() + target_entropy_;
  Var loss = g.scale(alpha, -mean_term);
  g.backward(loss, "alpha loss");
  diffcore::optimizer_step(store_, opt_);
}

}  // namespace oplab::policy
