#pragma once

#include "dmloc/gain.hpp"
#include "dmloc/state_history.hpp"

#include <functional>
#include <optional>

namespace dmloc {

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();  ///< rad/s, IMU frame
  Vec3 acc = Vec3::Zero();   ///< specific force, m/s^2, IMU frame
};

/// Noise densities are continuous-time: a step of length dt adds std^2 * dt.
struct FilterConfig {
  double std_n_gyro = 0.1;   ///< random walk of the body-rate state
  double std_n_acc = 0.5;    ///< random walk of the specific-force state
  double std_nb_gyro = 1e-4;
  double std_nb_acc = 1e-3;
  double std_extrinsic = 1e-6;
  double lidar_point_noise_std = 0.05;
  double imu_meas_gyro_std = 0.01;
  double imu_meas_acc_std = 0.1;
  int max_iterations = 4;
  double convergence_eps = 1e-4;
  double cv_timer_period = 0.01;
  double imu_timeout = 0.015;
  double history_horizon = 0.5;
  double cv_noise_inflation = 10.0;  ///< std multiplier on body-rate/acc noise in CV mode
  bool estimate_extrinsics = false;

  /// Throws ValidationError naming the first bad field.
  void validate() const;
};

/// Per-block prior standard deviations used to seed the covariance.
struct InitialUncertainty {
  double rot = 0.05;
  double pos = 0.5;
  double vel = 0.2;
  double omega = 0.05;
  double acc = 0.5;
  double bias_gyro = 1e-3;
  double bias_acc = 1e-2;
  double gravity = 0.1;
  double rot_il = 1e-3;
  double pos_il = 1e-3;

  Covariance matrix() const;
};

enum class Mode { kImuDriven, kCvFallback };

class StaleSampleError : public DataError {
 public:
  using DataError::DataError;
};

struct LidarUpdateReport {
  bool applied = false;
  bool converged = false;
  bool degraded = false;  ///< no correspondences; update skipped
  bool diverged = false;  ///< step norm grew 3x in a row; prior kept
  int iterations = 0;
  Eigen::Index measurements = 0;
  double last_step_norm = 0.0;
};

/// Builds the stacked point-to-map constraints at a linearization point.
using MeasurementProvider = std::function<MeasurementSystem(const NavState&)>;

/// Iterated error-state Kalman filter over NavState.
///
/// IMU samples drive propagation and are then fused as measurements of the
/// body-rate and specific-force states. Without IMU data a periodic timer
/// keeps predicting with the constant-velocity model.
class Estimator {
 public:
  Estimator(const FilterConfig& cfg, const NavState& x0, const Covariance& p0, double t0);

  const StampedState& current() const { return current_; }
  const StateHistory& history() const { return history_; }
  Mode mode() const { return mode_; }
  std::optional<double> last_imu_time() const { return last_imu_t_; }
  const FilterConfig& config() const { return cfg_; }

  /// Advances to u.t with the process model. Throws StaleSampleError if
  /// u.t precedes the current state, ValidationError if u is not finite.
  void propagate_imu(const ImuSample& u);

  /// Kalman update with the residual [gyro - b_g - omega; acc - b_a - a].
  void imu_measurement_update(const ImuSample& u);

  /// propagate_imu followed by imu_measurement_update.
  void process_imu(const ImuSample& u);

  /// One constant-velocity prediction of length dt with inflated noise.
  void propagate_cv(double dt);

  /// Timer callback. When the IMU has been silent for longer than
  /// imu_timeout, predicts up to `now` in cv_timer_period steps and returns
  /// the number of steps taken.
  int cv_tick(double now);

  /// Model prediction to t without touching the mode; used before a scan.
  void predict_to(double t);

  LidarUpdateReport iterated_lidar_update(const MeasurementProvider& provider);

  NavState query_state_at(double t) const { return history_.query(t); }

 private:
  void step(double target_t, bool cv);
  void apply(const NavState& x, const Covariance& p);

  FilterConfig cfg_;
  StampedState current_;
  StateHistory history_;
  Mode mode_ = Mode::kCvFallback;
  std::optional<double> last_imu_t_;
};

}  // namespace dmloc
