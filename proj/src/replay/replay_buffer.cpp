#include "oplab/replay/replay_buffer.hpp"

#include "oplab/replay/validation.hpp"

#include <fstream>

namespace oplab::replay {

Batch ReplayBuffer::sample_batch(std::size_t n, RngStream& rng) const {
  const auto idx = sample_indices(n, rng);
  const Transition& first = storage_[0];
  Batch b;
  b.s.resize(n, first.s.size());
  b.a.resize(n, first.a.size());
  b.s_next.resize(n, first.s_next.size());
  b.r.resize(n);
  b.c.resize(n);
  b.d.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = storage_[idx[i]];
    b.s.row(i) = t.s.transpose();
    b.a.row(i) = t.a.transpose();
    b.s_next.row(i) = t.s_next.transpose();
    b.r(i) = t.r;
    b.c(i) = t.c;
    b.d(i) = t.d ? 1.0 : 0.0;
  }
  return b;
}

void ReplayBuffer::dump_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw StateError("replay dump: cannot open " + path);
  f << "index,r,c,d,s,a,s_next\n";
  for (std::size_t i = 0; i < size(); ++i) {
    const Transition& t = at_ordered(i);
    f << i << ',' << t.r << ',' << t.c << ',' << (t.d ? 1 : 0) << ',';
    for (Eigen::Index j = 0; j < t.s.size(); ++j)
      f << (j ? " " : "") << t.s(j);
    f << ',';
    for (Eigen::Index j = 0; j < t.a.size(); ++j)
      f << (j ? " " : "") << t.a(j);
    f << ',';
    for (Eigen::Index j = 0; j < t.s_next.size(); ++j)
      f << (j ? " " : "") << t.s_next(j);
    f << '\n';
  }
}

ValidationSet collect_validation(envs::Env& env, const RolloutPolicy& policy,
                                 int episodes, RngStream& rng) {
  ValidationSet out;
  out.episodes.reserve(episodes);
  for (int e = 0; e < episodes; ++e) {
    EvalEpisode ep;
    Eigen::VectorXd obs = env.reset(rng);
    std::vector<double> rewards, costs, incentives;
    bool done = false;
    while (!done) {
      const Eigen::VectorXd action = policy(obs, rng);
      const envs::StepResult sr = env.step(action);
      Transition t;
      t.s = obs;
      t.a = action;
      t.r = sr.reward;
      t.c = sr.cost;
      t.s_next = sr.obs;
      t.d = false;  // step-limit truncation only
      ep.transitions.push_back(std::move(t));
      rewards.push_back(sr.reward);
      costs.push_back(sr.cost);
      incentives.push_back(sr.incentive);
      obs = sr.obs;
      done = sr.done;
    }
    ep.rewards = Eigen::Map<Eigen::VectorXd>(rewards.data(), rewards.size());
    ep.costs = Eigen::Map<Eigen::VectorXd>(costs.data(), costs.size());
    ep.incentives =
        Eigen::Map<Eigen::VectorXd>(incentives.data(), incentives.size());
    out.episodes.push_back(std::move(ep));
  }
  return out;
}

}  // namespace oplab::replay
