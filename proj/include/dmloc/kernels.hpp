#pragma once

// Data-parallel kernels. Each has a serial reference kept for tests and the
// benchmark; the parallel versions produce identical output for any thread
// count (fixed work partitioning, ordered reductions).

#include "dmloc/gain.hpp"

#include <cstddef>

namespace dmloc::kernels {

/// Row block size of the partitioned reduction. Independent of thread count.
inline constexpr Eigen::Index kReductionBlock = 256;

struct NormalEquations {
  Covariance hth = Covariance::Zero();    ///< H^T W H
  ErrorVector htr = ErrorVector::Zero();  ///< H^T W r
};

/// r may be empty, in which case htr stays zero.
NormalEquations normal_equations(const JacobianMatrix& h, const Eigen::VectorXd& r,
                                 const Eigen::VectorXd& w);
NormalEquations normal_equations_serial(const JacobianMatrix& h, const Eigen::VectorXd& r,
                                        const Eigen::VectorXd& w);

/// Runs fn(i) for i in [0, n). fn must only write to slot i of its outputs.
template <class Fn>
void parallel_for(std::ptrdiff_t n, Fn&& fn) {
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
}

template <class Fn>
void serial_for(std::ptrdiff_t n, Fn&& fn) {
  for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
}

}  // namespace dmloc::kernels
