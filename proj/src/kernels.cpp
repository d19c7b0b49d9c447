#include "dmloc/kernels.hpp"

#include <algorithm>
#include <vector>

namespace dmloc::kernels {
namespace {

void accumulate_rows(const JacobianMatrix& h, const Eigen::VectorXd& r, const Eigen::VectorXd& w,
                     Eigen::Index begin, Eigen::Index end, NormalEquations& out) {
  const bool with_r = r.size() > 0;
  for (Eigen::Index i = begin; i < end; ++i) {
    const auto row = h.row(i);
    const double wi = w[i];
    out.hth.noalias() += wi * row.transpose() * row;
    if (with_r) out.htr.noalias() += (wi * r[i]) * row.transpose();
  }
}

}  // namespace

// Same block partition and combination order as the parallel version, so the
// two agree bit for bit at any thread count.
NormalEquations normal_equations_serial(const JacobianMatrix& h, const Eigen::VectorXd& r,
                                        const Eigen::VectorXd& w) {
  const Eigen::Index m = h.rows();
  NormalEquations ne;
  for (Eigen::Index begin = 0; begin < m; begin += kReductionBlock) {
    NormalEquations part;
    accumulate_rows(h, r, w, begin, std::min(m, begin + kReductionBlock), part);
    ne.hth += part.hth;
    ne.htr += part.htr;
  }
  return ne;
}

NormalEquations normal_equations(const JacobianMatrix& h, const Eigen::VectorXd& r,
                                 const Eigen::VectorXd& w) {
  const Eigen::Index m = h.rows();
  const Eigen::Index blocks = (m + kReductionBlock - 1) / kReductionBlock;
  if (blocks <= 1) return normal_equations_serial(h, r, w);

  std::vector<NormalEquations> partial(static_cast<std::size_t>(blocks));
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index begin = b * kReductionBlock;
    const Eigen::Index end = std::min(m, begin + kReductionBlock);
    accumulate_rows(h, r, w, begin, end, partial[static_cast<std::size_t>(b)]);
  }
  NormalEquations ne;
  for (const auto& p : partial) {
    ne.hth += p.hth;
    ne.htr += p.htr;
  }
  return ne;
}

}  // namespace dmloc::kernels
