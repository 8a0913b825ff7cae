#include "oplab/policy/gaussian_policy.hpp"

#include "gradient_check.hpp"

#include <doctest.h>

#include <cmath>

using namespace oplab;
using diffcore::Graph;
using diffcore::Matrix;
using diffcore::Var;
using policy::GaussianPolicy;
using policy::PolicyConfig;

namespace {

PolicyConfig small_policy(int obs = 3, int act = 2,
                          bool state_dependent = false) {
  PolicyConfig pc;
  pc.obs_dim = obs;
  pc.act_dim = act;
  pc.hidden = {8, 8};
  pc.state_dependent_std = state_dependent;
  return pc;
}

policy::PolicyHead fixed_head(const Eigen::VectorXd& mean,
                              const Eigen::VectorXd& log_std) {
  policy::PolicyHead h;
  h.mean = mean.transpose();
  h.log_std = log_std.transpose();
  return h;
}

}  // namespace

TEST_CASE("zero noise lands exactly on tanh(mean)") {
  RngStream rng(1, 1);
  GaussianPolicy pol(small_policy(), rng);
  Eigen::VectorXd mean(2), log_std(2);
  mean << 0.7, -1.2;
  log_std << 0.0, 0.5;
  const auto head = fixed_head(mean, log_std);
  const auto s = pol.sample_with_noise(head, Matrix::Zero(1, 2));
  CHECK(s.action(0, 0) == doctest::Approx(std::tanh(0.7)).epsilon(1e-12));
  CHECK(s.action(0, 1) == doctest::Approx(std::tanh(-1.2)).epsilon(1e-12));
}

TEST_CASE("clamped log_std leaves the sample at tanh(mean)") {
  RngStream rng(1, 2);
  GaussianPolicy pol(small_policy(), rng);
  Eigen::VectorXd mean(2), log_std(2);
  mean << 0.3, -0.9;
  log_std << -20.0, -20.0;  // vanishing noise scale
  const auto head = fixed_head(mean, log_std);
  Matrix xi(1, 2);
  xi << 3.0, -2.0;
  const auto s = pol.sample_with_noise(head, xi);
  CHECK(s.action(0, 0) == doctest::Approx(std::tanh(0.3)).epsilon(1e-8));
  CHECK(s.action(0, 1) == doctest::Approx(std::tanh(-0.9)).epsilon(1e-8));
}

TEST_CASE("samples stay strictly inside the unit box with finite density") {
  RngStream init(2, 1);
  GaussianPolicy pol(small_policy(), init);
  RngStream rng(5, 5);
  Eigen::VectorXd mean(2), log_std(2);
  mean << 2.5, -4.0;
  log_std << 2.0, 1.0;
  const auto head = fixed_head(mean, log_std);
  for (int i = 0; i < 200; ++i) {
    const auto s = pol.sample(head, rng);
    CHECK(s.action.cwiseAbs().maxCoeff() < 1.0);
    CHECK(std::isfinite(s.log_prob(0)));
  }
}

TEST_CASE("pre-squash statistics match the head over many samples") {
  RngStream init(2, 2);
  GaussianPolicy pol(small_policy(3, 1), init);
  Eigen::VectorXd mean(1), log_std(1);
  mean << 0.0;
  log_std << 0.0;
  const auto head = fixed_head(mean, log_std);
  RngStream rng(9, 9);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto s = pol.sample(head, rng);
    sum += s.pre_squash(0, 0);
    sum_sq += s.pre_squash(0, 0) * s.pre_squash(0, 0);
  }
  const double m = sum / n;
  const double var = sum_sq / n - m * m;
  CHECK(std::abs(m) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("log density at the mode of a standard normal head") {
  RngStream init(2, 3);
  GaussianPolicy pol(small_policy(3, 1), init);
  Eigen::VectorXd mean(1), log_std(1);
  mean << 0.0;
  log_std << 0.0;
  const auto head = fixed_head(mean, log_std);
  const double lp = pol.log_prob(head, Matrix::Zero(1, 1))(0);
  // -0.5 ln(2 pi), no Jacobian correction at u = 0
  CHECK(lp == doctest::Approx(-0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("log density stays finite far into the tails") {
  RngStream init(2, 4);
  GaussianPolicy pol(small_policy(3, 1), init);
  Eigen::VectorXd mean(1), log_std(1);
  mean << 0.0;
  log_std << 0.0;
  const auto head = fixed_head(mean, log_std);
  Matrix u(1, 1);
  for (double v : {10.0, -10.0, 40.0, -40.0}) {
    u(0, 0) = v;
    CHECK(std::isfinite(pol.log_prob(head, u)(0)));
  }
}

TEST_CASE("squashed density integrates to one for random heads") {
  RngStream init(2, 5);
  GaussianPolicy pol(small_policy(3, 1), init);
  RngStream rng(31, 31);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd mean(1), log_std(1);
    mean << rng.uniform(-2.0, 2.0);
    log_std << rng.uniform(-2.0, 0.5);
    const auto head = fixed_head(mean, log_std);
    const double sigma = std::exp(log_std(0));
    // integrate p(a) da over a = tanh(u) by substitution: the integrand
    // exp(log_prob(u)) * sech^2(u) uses an independent sech^2
    const double lo = mean(0) - 9.0 * sigma;
    const double hi = mean(0) + 9.0 * sigma;
    const int n = 4000;  // Simpson rule, even interval count
    const double h = (hi - lo) / n;
    double acc = 0.0;
    Matrix u(1, 1);
    for (int i = 0; i <= n; ++i) {
      u(0, 0) = lo + i * h;
      const double t = std::tanh(u(0, 0));
      const double integrand =
          std::exp(pol.log_prob(head, u)(0)) * (1.0 - t * t);
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * integrand;
    }
    acc *= h / 3.0;
    CHECK(acc == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("deterministic action is the squashed mean") {
  RngStream init(2, 6);
  GaussianPolicy pol(small_policy(3, 2), init);
  // zero the network so the mean head is exactly the output bias
  auto& store = pol.store();
  for (auto& [name, e] : store.entries)
    if (name[0] == 'W') e.value.setZero();
  Matrix obs = Matrix::Zero(1, 3);

  store.at("b2").value << 0.0, 0.0;
  Matrix a = pol.deterministic_action(obs);
  CHECK(a(0, 0) == 0.0);
  CHECK(a(0, 1) == 0.0);

  store.at("b2").value << 0.5, -0.5;
  a = pol.deterministic_action(obs);
  CHECK(a(0, 0) == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
  CHECK(a(0, 1) == doctest::Approx(-std::tanh(0.5)).epsilon(1e-12));

  store.at("b2").value << 1000.0, -1000.0;  // bounded at the rails
  a = pol.deterministic_action(obs);
  CHECK(a(0, 0) == doctest::Approx(1.0));
  CHECK(a(0, 1) == doctest::Approx(-1.0));
  CHECK(a.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("log_prob agrees between the plain and tape paths") {
  RngStream init(2, 7);
  GaussianPolicy pol(small_policy(3, 2, true), init);
  RngStream rng(8, 8);
  const Matrix obs = rng.normal_matrix(5, 3);
  const auto head = pol.head(obs);
  const Matrix xi = rng.normal_matrix(5, 2);
  const auto s = pol.sample_with_noise(head, xi);

  Graph g;
  auto head_v = pol.head_on(g, g.constant(obs), false);
  Var lp = pol.log_prob_on(g, head_v, g.constant(s.pre_squash));
  for (int i = 0; i < 5; ++i)
    CHECK(g.value(lp)(i, 0) == doctest::Approx(s.log_prob(i)).epsilon(1e-12));
}

TEST_CASE("log_prob of a pre-squash point ignores how it was produced") {
  RngStream init(2, 8);
  GaussianPolicy pol(small_policy(3, 2), init);
  RngStream rng(18, 18);
  const Matrix obs = rng.normal_matrix(4, 3);
  const Matrix xi = rng.normal_matrix(4, 2);

  // same u once through the reparameterized path, once as a constant
  Graph g;
  auto head_v = pol.head_on(g, g.constant(obs), false);
  Var u_rp = pol.reparam_pre_squash(g, head_v, xi);
  Var lp_rp = pol.log_prob_on(g, head_v, u_rp);
  Var lp_const = pol.log_prob_on(g, head_v, g.detach(u_rp));
  CHECK(g.value(lp_rp) == g.value(lp_const));

  const auto plain = pol.sample_with_noise(pol.head(obs), xi);
  for (int i = 0; i < 4; ++i)
    CHECK(plain.log_prob(i) ==
          doctest::Approx(g.value(lp_rp)(i, 0)).epsilon(1e-12));
}

TEST_CASE("reparameterized mean gradient matches finite differences") {
  // d E[a] / d mean with common random numbers
  RngStream init(2, 9);
  GaussianPolicy pol(small_policy(2, 1), init);
  RngStream rng(77, 77);
  const Matrix obs = rng.normal_matrix(16, 2);
  const Matrix xi = rng.normal_matrix(16, 1);
  const auto build = [&](Graph& g) {
    auto head = pol.head_on(g, g.constant(obs), true);
    Var u = pol.reparam_pre_squash(g, head, xi);
    return g.mean(g.tanh(u));
  };
  CHECK(testing::max_grad_rel_error({&pol.store()}, build) < 1e-3);
}

TEST_CASE("temperature update follows the entropy gap") {
  // loss mean(-alpha (log pi + H_t)): alpha rises when entropy is too low
  policy::Temperature temp(1.0, 2.0, 1e-2);
  Eigen::VectorXd logp(3);

  // stationary point: mean log pi == -H_target
  logp << -2.0, -2.0, -2.0;
  const double before = temp.alpha();
  temp.update(logp);
  CHECK(temp.alpha() == doctest::Approx(before).epsilon(1e-12));

  // entropy too low (log pi above -H_target): alpha increases
  policy::Temperature temp2(1.0, 2.0, 1e-2);
  logp << 1.0, 0.5, 1.5;
  temp2.update(logp);
  CHECK(temp2.alpha() > 1.0);

  // entropy too high: alpha decreases but stays positive
  policy::Temperature temp3(1.0, 2.0, 1e-2);
  logp << -10.0, -9.0, -11.0;
  for (int i = 0; i < 200; ++i) temp3.update(logp);
  CHECK(temp3.alpha() < 1.0);
  CHECK(temp3.alpha() > 0.0);
}

TEST_CASE("state-dependent head clamps log_std from the network") {
  RngStream init(2, 10);
  auto cfg = small_policy(3, 2, true);
  GaussianPolicy pol(cfg, init);
  // exaggerate the final layer so raw outputs leave the clamp range
  pol.store().at("b2").value << 0.0, 0.0, 50.0, -50.0;
  RngStream rng(4, 4);
  const auto head = pol.head(rng.normal_matrix(6, 3));
  CHECK(head.log_std.maxCoeff() <= policy::kLogStdMax);
  CHECK(head.log_std.minCoeff() >= policy::kLogStdMin);
}

TEST_CASE("free log_std parameter is clamped on read after updates") {
  RngStream init(2, 11);
  GaussianPolicy pol(small_policy(3, 2, false), init);
  pol.store().at("log_std").value << 7.0, -45.0;  // outside the clamp
  RngStream rng(4, 5);
  const auto head = pol.head(rng.normal_matrix(3, 3));
  CHECK(head.log_std.maxCoeff() <= policy::kLogStdMax);
  CHECK(head.log_std.minCoeff() >= policy::kLogStdMin);
}
