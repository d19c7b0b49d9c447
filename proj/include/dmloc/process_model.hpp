#pragma once

#include "dmloc/nav_state.hpp"

namespace dmloc {

inline constexpr int kNoiseDim = 12;

/// Process noise w = [n_gyro, n_acc, n_bias_gyro, n_bias_acc].
using NoiseVector = Eigen::Matrix<double, kNoiseDim, 1>;
using NoiseJacobian = Eigen::Matrix<double, kStateDim, kNoiseDim>;

/// f(x, w) in error-state ordering. The position row already carries the
/// half-step acceleration term, so x (+) dt * f is a second-order position step.
ErrorVector process_derivative(const NavState& x, double dt,
                               const NoiseVector& w = NoiseVector::Zero());

/// x_{i+1} = x_i (+) dt * f(x_i, w_i).
NavState transition(const NavState& x, double dt, const NoiseVector& w = NoiseVector::Zero());

struct TransitionJacobians {
  Covariance fx;     ///< d(x' (-) x'_0) / d(dx)
  NoiseJacobian fw;  ///< d(x' (-) x'_0) / dw
};

TransitionJacobians transition_jacobians(const NavState& x, double dt);

}  // namespace dmloc
