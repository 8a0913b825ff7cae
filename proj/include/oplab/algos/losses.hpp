#pragma once

#include <Eigen/Core>

namespace oplab::algos {

// Bellman target r + gamma * (1 - d) * v_targ_next, the backup every critic
// in this codebase regresses to.
inline double q_target_single(double r, double d, double v_targ_next,
                              double gamma) {
  return r + gamma * (1.0 - d) * v_targ_next;
}

inline Eigen::VectorXd q_targets(const Eigen::VectorXd& r,
                                 const Eigen::VectorXd& d,
                                 const Eigen::VectorXd& next_value,
                                 double gamma) {
  return r.array() + gamma * (1.0 - d.array()) * next_value.array();
}

// Mean squared residual between the state value and the critic at a policy
// action; the critic side is treated as constant by the caller.
inline double v_loss_value(const Eigen::VectorXd& v_pred,
                           const Eigen::VectorXd& q_at_policy_action) {
  return (v_pred - q_at_policy_action).array().square().mean();
}

inline Eigen::VectorXd advantage(const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& v) {
  return q - v;
}

// (A - mean) / (population std + 1e-8); a single-element batch normalizes
// to zero.
Eigen::VectorXd normalize_advantages(const Eigen::VectorXd& a);

// Combined reward/cost advantage (q_r - v_r) - beta * (q_c - v_c); the
// caller normalizes the combined quantity.
inline Eigen::VectorXd copac2_advantage(const Eigen::VectorXd& q_r,
                                        const Eigen::VectorXd& v_r,
                                        const Eigen::VectorXd& q_c,
                                        const Eigen::VectorXd& v_c,
                                        double beta) {
  return (q_r - v_r) - beta * (q_c - v_c);
}

// Dual ascent on the cost constraint: beta <- max(0, beta - lambda * (M -
// J_C)). Rises while recent episode cost exceeds the limit.
inline double updated_beta(double beta, double cost_limit, double j_c,
                           double lambda_beta) {
  return std::max(0.0, beta - lambda_beta * (cost_limit - j_c));
}

// Entropy-regularized twin-critic target
// r + gamma * (1 - d) * (min_next - alpha * logp_next).
inline Eigen::VectorXd sac_q_targets(const Eigen::VectorXd& r,
                                     const Eigen::VectorXd& d,
                                     const Eigen::VectorXd& min_q_next,
                                     const Eigen::VectorXd& logp_next,
                                     double alpha, double gamma) {
  return r.array() +
         gamma * (1.0 - d.array()) *
             (min_q_next.array() - alpha * logp_next.array());
}

}  // namespace oplab::algos
