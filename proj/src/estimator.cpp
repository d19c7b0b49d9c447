#include "dmloc/estimator.hpp"

#include "dmloc/kernels.hpp"
#include "dmloc/process_model.hpp"
#include "dmloc/so3.hpp"

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <string>

namespace dmloc {
namespace {

constexpr double kTimeEps = 1e-9;

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(std::string("filter config: ") + what);
}

Eigen::DiagonalMatrix<double, kNoiseDim> noise_density(const FilterConfig& cfg, double scale) {
  Eigen::Matrix<double, kNoiseDim, 1> d;
  d.segment<3>(0).setConstant(std::pow(scale * cfg.std_n_gyro, 2));
  d.segment<3>(3).setConstant(std::pow(scale * cfg.std_n_acc, 2));
  d.segment<3>(6).setConstant(std::pow(cfg.std_nb_gyro, 2));
  d.segment<3>(9).setConstant(std::pow(cfg.std_nb_acc, 2));
  return d.asDiagonal();
}

struct Posterior {
  ErrorVector delta;
  Covariance cov;
};

// Information-form update around a linearization point whose prior mean,
// relative to that point, is mu with covariance p.
Posterior information_update(const Covariance& p, const ErrorVector& mu,
                             const kernels::NormalEquations& ne) {
  const Covariance info = information_matrix(p);
  const Covariance a = ne.hth + info;
  const Eigen::LLT<Covariance> llt(a);
  Posterior post;
  post.delta = llt.solve(info * mu - ne.htr);
  const Covariance kh = llt.solve(ne.hth);
  post.cov = (Covariance::Identity() - kh) * p;
  symmetrize(post.cov);
  return post;
}

}  // namespace

void FilterConfig::validate() const {
  require(std_n_gyro > 0 && std_n_acc > 0 && std_nb_gyro > 0 && std_nb_acc > 0,
          "process noise std must be > 0");
  require(std_extrinsic > 0, "std_extrinsic must be > 0");
  require(lidar_point_noise_std > 0, "lidar_point_noise_std must be > 0");
  require(imu_meas_gyro_std > 0 && imu_meas_acc_std > 0, "imu measurement std must be > 0");
  require(max_iterations >= 1, "max_iterations must be >= 1");
  require(convergence_eps > 0, "convergence_eps must be > 0");
  require(cv_timer_period > 0, "cv_timer_period must be > 0");
  require(imu_timeout > 0, "imu_timeout must be > 0");
  require(history_horizon > 0, "history_horizon must be > 0");
  require(cv_noise_inflation >= 1.0, "cv_noise_inflation must be >= 1");
}

Covariance InitialUncertainty::matrix() const {
  ErrorVector d;
  const double stds[10] = {rot, pos, vel, omega, acc, bias_gyro, bias_acc, gravity, rot_il, pos_il};
  for (int b = 0; b < 10; ++b) d.segment<3>(3 * b).setConstant(stds[b] * stds[b]);
  return d.asDiagonal();
}

Estimator::Estimator(const FilterConfig& cfg, const NavState& x0, const Covariance& p0, double t0)
    : cfg_(cfg), history_(cfg.history_horizon, cfg.cv_timer_period) {
  cfg_.validate();
  current_ = StampedState{t0, x0, p0};
  history_.push(current_);
}

void Estimator::apply(const NavState& x, const Covariance& p) {
  current_.state = x;
  current_.cov = p;
  history_.replace_back(current_);
}

void Estimator::step(double target_t, bool cv) {
  const double dt = target_t - current_.t;
  if (dt > 0.0) {
    const auto j = transition_jacobians(current_.state, dt);
    const double scale = cv ? cfg_.cv_noise_inflation : 1.0;
    // Discrete noise covariance is Q / dt, so F_w (Q / dt) F_w^T = Q dt.
    const auto q = noise_density(cfg_, scale);
    Covariance p = j.fx * current_.cov * j.fx.transpose() + (1.0 / dt) * (j.fw * q * j.fw.transpose());
    const double ext_var = cfg_.std_extrinsic * cfg_.std_extrinsic * dt;
    for (int i = blk::kRotIl; i < kStateDim; ++i) p(i, i) += ext_var;
    symmetrize(p);
    current_.state = transition(current_.state, dt);
    current_.cov = p;
  }
  current_.t = target_t;
  history_.push(current_);
}

void Estimator::propagate_imu(const ImuSample& u) {
  if (!std::isfinite(u.t) || !u.gyro.allFinite() || !u.acc.allFinite()) {
    throw ValidationError("non-finite IMU sample");
  }
  if (u.t < current_.t) {
    throw StaleSampleError("IMU sample at t=" + std::to_string(u.t) +
                           " precedes current state t=" + std::to_string(current_.t));
  }
  // Long gaps are split so that no single step exceeds the timer period.
  while (u.t - current_.t > cfg_.cv_timer_period + kTimeEps) {
    step(current_.t + cfg_.cv_timer_period, false);
  }
  step(u.t, false);
  mode_ = Mode::kImuDriven;
  last_imu_t_ = u.t;
}

void Estimator::imu_measurement_update(const ImuSample& u) {
  if (!u.gyro.allFinite() || !u.acc.allFinite()) throw ValidationError("non-finite IMU sample");
  const NavState& x = current_.state;
  MeasurementSystem sys;
  sys.h = JacobianMatrix::Zero(6, kStateDim);
  sys.r.resize(6);
  sys.r_inv.resize(6);
  // Residuals in the "0 = r + H dx" convention: r = h(x) - z.
  sys.r.head<3>() = x.omega + x.bias_gyro - u.gyro;
  sys.r.tail<3>() = x.acc + x.bias_acc - u.acc;
  sys.h.block<3, 3>(0, blk::kOmega).setIdentity();
  sys.h.block<3, 3>(0, blk::kBiasGyro).setIdentity();
  sys.h.block<3, 3>(3, blk::kAcc).setIdentity();
  sys.h.block<3, 3>(3, blk::kBiasAcc).setIdentity();
  sys.r_inv.head<3>().setConstant(1.0 / (cfg_.imu_meas_gyro_std * cfg_.imu_meas_gyro_std));
  sys.r_inv.tail<3>().setConstant(1.0 / (cfg_.imu_meas_acc_std * cfg_.imu_meas_acc_std));

  if (sys.r.isZero(0.0)) return;
  const auto ne = kernels::normal_equations(sys.h, sys.r, sys.r_inv);
  const auto post = information_update(current_.cov, ErrorVector::Zero(), ne);
  apply(boxplus(x, post.delta), post.cov);
}

void Estimator::process_imu(const ImuSample& u) {
  propagate_imu(u);
  imu_measurement_update(u);
}

void Estimator::propagate_cv(double dt) {
  if (!(dt > 0.0)) throw ValidationError("propagate_cv requires dt > 0");
  step(current_.t + dt, true);
  mode_ = Mode::kCvFallback;
}

int Estimator::cv_tick(double now) {
  if (last_imu_t_ && now - *last_imu_t_ <= cfg_.imu_timeout) return 0;
  mode_ = Mode::kCvFallback;
  int steps = 0;
  while (current_.t < now - kTimeEps) {
    double target = current_.t + cfg_.cv_timer_period;
    if (target > now - kTimeEps) target = now;
    step(target, true);
    ++steps;
  }
  return steps;
}

void Estimator::predict_to(double t) {
  if (t < current_.t - kTimeEps) {
    throw StaleSampleError("cannot predict back to t=" + std::to_string(t) +
                           " from t=" + std::to_string(current_.t));
  }
  const bool cv = mode_ == Mode::kCvFallback;
  while (t - current_.t > cfg_.cv_timer_period + kTimeEps) {
    step(current_.t + cfg_.cv_timer_period, cv);
  }
  if (t > current_.t) step(t, cv);
}

LidarUpdateReport Estimator::iterated_lidar_update(const MeasurementProvider& provider) {
  LidarUpdateReport report;
  const NavState prior = current_.state;
  const Covariance p_prior = current_.cov;

  NavState x = prior;
  Covariance p_post = p_prior;
  double prev_norm = std::numeric_limits<double>::infinity();
  int growth_streak = 0;

  for (int it = 0; it < cfg_.max_iterations; ++it) {
    MeasurementSystem sys = provider(x);
    if (sys.rows() == 0) {
      report.degraded = true;
      return report;
    }
    if (!cfg_.estimate_extrinsics) sys.h.rightCols<6>().setZero();

    // Prior mean and covariance re-expressed around the current iterate.
    const ErrorVector mu = boxminus(prior, x);
    Covariance j = Covariance::Identity();
    j.block<3, 3>(blk::kRot, blk::kRot) = so3::right_jacobian_inv(mu.segment<3>(blk::kRot));
    j.block<3, 3>(blk::kRotIl, blk::kRotIl) = so3::right_jacobian_inv(mu.segment<3>(blk::kRotIl));
    const Covariance p_iter = j * p_prior * j.transpose();

    const auto ne = kernels::normal_equations(sys.h, sys.r, sys.r_inv);
    const auto post = information_update(p_iter, mu, ne);

    x = boxplus(x, post.delta);
    p_post = post.cov;
    report.iterations = it + 1;
    report.measurements = sys.rows();
    report.last_step_norm = post.delta.norm();

    spdlog::trace("iteration {} step {:.3e} rows {}", it + 1, report.last_step_norm, sys.rows());
    if (report.last_step_norm < cfg_.convergence_eps) {
      report.converged = true;
      break;
    }
    // A repeating step (association flipping between two sets) is not growth.
    growth_streak = report.last_step_norm > prev_norm * (1.0 + 1e-6) ? growth_streak + 1 : 0;
    prev_norm = report.last_step_norm;
    if (growth_streak >= 3) {
      report.diverged = true;
      return report;
    }
  }

  report.applied = true;
  apply(x, p_post);
  return report;
}

}  // namespace dmloc
