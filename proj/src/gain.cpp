#include "dmloc/gain.hpp"

#include "dmloc/kernels.hpp"

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

namespace dmloc {

Covariance information_matrix(const Covariance& p) {
  const Covariance eye = Covariance::Identity();
  Eigen::LDLT<Covariance> ldlt(p + kCovarianceRegularization * eye);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      (ldlt.vectorD().array() > 0.0).all()) {
    return ldlt.solve(eye);
  }
  const double ridge = std::max(1e-9, 1e-9 * p.trace() / kStateDim);
  spdlog::warn("covariance not positive definite; regularizing with ridge {:.3g}", ridge);
  return Eigen::LDLT<Covariance>(p + ridge * eye).solve(eye);
}

GainMatrix compute_gain(const JacobianMatrix& h, const Eigen::VectorXd& r_inv,
                        const Covariance& p) {
  if (h.rows() == 0) return GainMatrix(kStateDim, 0);
  const auto ne = kernels::normal_equations(h, Eigen::VectorXd(), r_inv);
  const Covariance a = ne.hth + information_matrix(p);
  const GainMatrix htw = h.transpose() * r_inv.asDiagonal();
  return a.llt().solve(htw);
}

}  // namespace dmloc
