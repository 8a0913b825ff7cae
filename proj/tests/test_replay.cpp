#include "oplab/envs/nav.hpp"
#include "oplab/replay/replay_buffer.hpp"
#include "oplab/replay/validation.hpp"

#include <doctest.h>

using namespace oplab;
using replay::ReplayBuffer;
using replay::Transition;

namespace {

Transition make_t(double tag) {
  Transition t;
  t.s = Eigen::VectorXd::Constant(2, tag);
  t.a = Eigen::VectorXd::Constant(1, tag);
  t.r = tag;
  t.c = 0.0;
  t.s_next = Eigen::VectorXd::Constant(2, tag + 0.5);
  t.d = false;
  return t;
}

}  // namespace

TEST_CASE("ring keeps the most recent capacity entries") {
  ReplayBuffer buf(3);
  for (int i = 1; i <= 4; ++i) buf.push(make_t(i));
  CHECK(buf.size() == 3);
  CHECK(buf.at_ordered(0).r == 2.0);
  CHECK(buf.at_ordered(1).r == 3.0);
  CHECK(buf.at_ordered(2).r == 4.0);
}

TEST_CASE("push to an empty buffer gives size one") {
  ReplayBuffer buf(5);
  buf.push(make_t(1));
  CHECK(buf.size() == 1);
}

TEST_CASE("size saturates at capacity") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 10; ++i) buf.push(make_t(i));
  CHECK(buf.size() == 3);
}

TEST_CASE("ordered iteration matches push order over many wraps") {
  ReplayBuffer buf(7);
  for (int i = 0; i < 53; ++i) buf.push(make_t(i));
  for (std::size_t k = 0; k < buf.size(); ++k)
    CHECK(buf.at_ordered(k).r == doctest::Approx(53 - 7 + static_cast<int>(k)));
}

TEST_CASE("sampling a singleton buffer repeats the single transition") {
  ReplayBuffer buf(4);
  buf.push(make_t(9));
  RngStream rng(1, 1);
  const auto batch = buf.sample_batch(4, rng);
  for (int i = 0; i < 4; ++i) CHECK(batch.r(i) == 9.0);
}

TEST_CASE("sampling an empty buffer is a state error") {
  ReplayBuffer buf(4);
  RngStream rng(1, 1);
  CHECK_THROWS_AS(buf.sample_batch(1, rng), replay::StateError);
}

TEST_CASE("uniform sampling visits a two-entry buffer evenly") {
  ReplayBuffer buf(2);
  buf.push(make_t(0));
  buf.push(make_t(1));
  RngStream rng(3, 3);
  long ones = 0;
  const int n = 10000;
  const auto idx = buf.sample_indices(n, rng);
  for (auto i : idx) ones += static_cast<long>(i);
  const double freq = static_cast<double>(ones) / n;
  CHECK(freq > 0.48);
  CHECK(freq < 0.52);
}

TEST_CASE("fixed seed reproduces the same batch") {
  ReplayBuffer buf(16);
  for (int i = 0; i < 16; ++i) buf.push(make_t(i));
  RngStream rng1(5, 5), rng2(5, 5);
  const auto a = buf.sample_batch(8, rng1);
  const auto b = buf.sample_batch(8, rng2);
  CHECK(a.r == b.r);
  CHECK(a.s == b.s);
}

TEST_CASE("validation episodes are complete, grouped and sized by config") {
  envs::NavConfig cfg;
  cfg.episode_len = 200;
  envs::NavEnv env(cfg);
  RngStream rng(7, 7);
  // scripted random policy; no agent required
  RngStream policy_rng(8, 8);
  replay::RolloutPolicy policy = [&](const Eigen::VectorXd&, RngStream& r) {
    return r.uniform_vector(2, -1.0, 1.0);
  };
  const auto val = replay::collect_validation(env, policy, 5, rng);
  CHECK(val.episodes.size() == 5);
  CHECK(val.total_transitions() == 1000);
  for (const auto& ep : val.episodes) {
    CHECK(ep.transitions.size() == 200);
    CHECK(ep.rewards.size() == 200);
    CHECK(ep.costs.size() == 200);
    // step-limit truncation is stored with d = 0
    CHECK_FALSE(ep.transitions.back().d);
  }
}

TEST_CASE("validation collection is deterministic and leaves buffers alone") {
  envs::NavConfig cfg;
  cfg.episode_len = 50;
  envs::NavEnv env1(cfg), env2(cfg);
  replay::RolloutPolicy policy = [](const Eigen::VectorXd& obs, RngStream& r) {
    Eigen::VectorXd a(2);
    a << std::tanh(obs(0) + r.normal() * 0.1), std::tanh(obs(1));
    return a;
  };
  ReplayBuffer buf(8);
  for (int i = 0; i < 8; ++i) buf.push(make_t(i));

  RngStream r1(11, 11), r2(11, 11);
  const auto v1 = replay::collect_validation(env1, policy, 3, r1);
  const auto v2 = replay::collect_validation(env2, policy, 3, r2);
  REQUIRE(v1.episodes.size() == v2.episodes.size());
  for (std::size_t e = 0; e < v1.episodes.size(); ++e) {
    CHECK(v1.episodes[e].rewards == v2.episodes[e].rewards);
    CHECK(v1.episodes[e].costs == v2.episodes[e].costs);
  }

  // training buffer untouched by validation
  CHECK(buf.size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(buf.at_ordered(i).r == i);
}

TEST_CASE("mixed-sign bookkeeping reconstructs the reward exactly") {
  envs::NavConfig cfg;
  cfg.episode_len = 120;
  cfg.penalty_weight = 0.7;
  envs::NavEnv env(cfg);
  RngStream rng(13, 13);
  replay::RolloutPolicy policy = [](const Eigen::VectorXd&, RngStream& r) {
    return r.uniform_vector(2, -1.0, 1.0);
  };
  const auto val = replay::collect_validation(env, policy, 2, rng);
  for (const auto& ep : val.episodes)
    for (Eigen::Index t = 0; t < ep.rewards.size(); ++t)
      CHECK(ep.rewards(t) ==
            ep.incentives(t) - cfg.penalty_weight * ep.costs(t));
}
