#include "oplab/diag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oplab::diag {

FinalWindow RunSummary::final_window() const {
  FinalWindow fw;
  if (records.empty()) return fw;
  const int n = static_cast<int>(records.size());
  const int window = std::max(1, n / 10);
  for (int i = n - window; i < n; ++i) {
    fw.reward += records[i].ep_reward;
    fw.incentive += records[i].ep_incentive;
    fw.cost += records[i].ep_cost;
  }
  fw.reward /= window;
  fw.incentive /= window;
  fw.cost /= window;
  fw.checkpoints = window;
  return fw;
}

namespace {
double rms(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x * x;
  return std::sqrt(acc / static_cast<double>(xs.size()));
}
}  // namespace

TdErrorReport validation_td_error(const algos::Agent& agent,
                                  const replay::ValidationSet& val,
                                  RngStream& rng) {
  if (val.episodes.empty())
    throw std::invalid_argument("validation_td_error: empty validation set");
  const algos::TdResiduals res = agent.td_residuals(val, rng);
  TdErrorReport report;
  report.reward_rms = rms(res.reward);
  if (!res.cost.empty()) report.cost_rms = rms(res.cost);
  return report;
}

double mc_return(const Eigen::VectorXd& rewards, double gamma) {
  double acc = 0.0;
  double discount = 1.0;
  for (Eigen::Index t = 0; t < rewards.size(); ++t) {
    acc += discount * rewards(t);
    discount *= gamma;
  }
  return acc;
}

double q_estimation_error(const algos::Agent& agent,
                          const replay::ValidationSet& val, double gamma) {
  double acc = 0.0;
  long count = 0;
  for (const auto& ep : val.episodes) {
    const Eigen::Index len = ep.rewards.size();
    // Suffix returns built backwards so each step costs O(1).
    Eigen::VectorXd suffix(len);
    double running = 0.0;
    for (Eigen::Index t = len - 1; t >= 0; --t) {
      running = ep.rewards(t) + gamma * running;
      suffix(t) = running;
    }
    for (Eigen::Index t = 0; t < len; ++t) {
      const auto& tr = ep.transitions[static_cast<std::size_t>(t)];
      acc += agent.q_policy_value(tr.s, tr.a) - suffix(t);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

RatioResult cost_adjustment_ratio(const RunSummary& run, long early_step) {
  RatioResult out;
  if (run.records.empty()) return out;
  const MetricsRecord& start = run.records.front();
  // Checkpoint closest to the requested early step.
  const MetricsRecord* early = &run.records.back();
  long best = std::abs(early->env_step - early_step);
  for (const auto& r : run.records) {
    const long dist = std::abs(r.env_step - early_step);
    if (dist < best) {
      best = dist;
      early = &r;
    }
  }
  const double denom = start.ep_incentive - early->ep_incentive;
  if (std::abs(denom) < 1e-9) return out;  // undefined, flagged
  out.value = (start.ep_cost - early->ep_cost) / denom;
  out.defined = true;
  return out;
}

double iqm(std::vector<double> scores) {
  if (scores.empty()) throw std::invalid_argument("iqm: empty input");
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  double weighted = 0.0;
  double total_weight = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    const double overlap =
        std::max(0.0, std::min(hi, 0.75) - std::max(lo, 0.25));
    weighted += overlap * scores[i];
    total_weight += overlap;
  }
  return weighted / total_weight;
}

std::vector<double> performance_profile(
    const std::vector<double>& scores, const std::vector<double>& thresholds) {
  if (scores.empty())
    throw std::invalid_argument("performance_profile: empty scores");
  std::vector<double> fractions;
  fractions.reserve(thresholds.size());
  for (double tau : thresholds) {
    long above = 0;
    for (double s : scores)
      if (s > tau) ++above;
    fractions.push_back(static_cast<double>(above) /
                        static_cast<double>(scores.size()));
  }
  return fractions;
}

}  // namespace oplab::diag
