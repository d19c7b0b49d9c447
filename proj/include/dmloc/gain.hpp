#pragma once

#include "dmloc/nav_state.hpp"

#include <Eigen/Core>

namespace dmloc {

/// Stacked measurement Jacobian, one row per scalar constraint.
using JacobianMatrix = Eigen::Matrix<double, Eigen::Dynamic, kStateDim, Eigen::RowMajor>;
using GainMatrix = Eigen::Matrix<double, kStateDim, Eigen::Dynamic>;

/// Linearized constraints 0 = r + H dx + v, v ~ N(0, diag(1 / r_inv)).
struct MeasurementSystem {
  JacobianMatrix h;
  Eigen::VectorXd r;
  Eigen::VectorXd r_inv;

  Eigen::Index rows() const { return h.rows(); }
};

/// Regularization added to P before inversion.
inline constexpr double kCovarianceRegularization = 1e-12;

/// (P + eps I)^-1. Falls back to a stronger ridge (and logs) when P is not
/// numerically positive definite.
Covariance information_matrix(const Covariance& p);

/// K = (H^T R^-1 H + P^-1)^-1 H^T R^-1. Cost is linear in the number of
/// rows; the m x m innovation matrix is never formed.
GainMatrix compute_gain(const JacobianMatrix& h, const Eigen::VectorXd& r_inv,
                        const Covariance& p);

}  // namespace dmloc
