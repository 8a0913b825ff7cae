#pragma once

#include <Eigen/Core>

namespace oplab::algos::detail {

inline Eigen::MatrixXd concat_sa(const Eigen::MatrixXd& s,
                                 const Eigen::MatrixXd& a) {
  Eigen::MatrixXd x(s.rows(), s.cols() + a.cols());
  x << s, a;
  return x;
}

inline Eigen::MatrixXd stack_sa(const Eigen::VectorXd& s,
                                const Eigen::VectorXd& a) {
  Eigen::MatrixXd x(1, s.size() + a.size());
  x << s.transpose(), a.transpose();
  return x;
}

}  // namespace oplab::algos::detail
