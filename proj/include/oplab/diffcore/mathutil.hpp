#pragma once

#include <Eigen/Core>

namespace oplab::diffcore {

// tanh through the vectorized exp kernel; std::tanh on doubles falls back to
// a scalar libm call, which dominates the training step otherwise. Accurate
// to a couple of ulps; the magnitude clamp keeps exp finite (tanh(20) is 1
// to double precision). Used for every squash and activation so the plain
// and tape paths agree bitwise.
inline Eigen::MatrixXd fast_tanh(const Eigen::MatrixXd& x) {
  const auto a = x.array();
  const Eigen::ArrayXXd t = (2.0 * a.abs().min(20.0)).exp();
  return (a.sign() * (t - 1.0) / (t + 1.0)).matrix();
}

}  // namespace oplab::diffcore
