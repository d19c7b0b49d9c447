#pragma once

#include "dmloc/estimator.hpp"
#include "dmloc/lidar_meas.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace dmloc::sim {

/// Bounded parallelogram origin + a * edge_u + b * edge_v, a, b in [0, 1].
struct Rect {
  Vec3 origin = Vec3::Zero();
  Vec3 edge_u = Vec3::UnitX();
  Vec3 edge_v = Vec3::UnitY();

  bool operator==(const Rect&) const = default;
};

/// Ray parameter of the first hit with rect, if any (t > 0).
std::optional<double> intersect(const Rect& rect, const Vec3& origin, const Vec3& dir);

enum class WorldKind { kBoxRoom, kPortLike };

struct World {
  WorldKind kind = WorldKind::kBoxRoom;
  std::uint64_t seed = 0;
  std::vector<Rect> planes;

  bool operator==(const World&) const = default;
};

/// Fixed layout parameters of the port-like generator.
struct PortLayout {
  int container_rows = 4;
  int container_cols = 6;
  int pillars = 8;
};

/// Number of rectangles gen_world(kPortLike, seed) produces for a layout:
/// one ground plane, five faces per container stack, four per pillar.
std::size_t port_plane_count(const PortLayout& layout = {});

World gen_world(WorldKind kind, std::uint64_t seed);

/// Grid samples over every rectangle at roughly the given spacing.
std::vector<Vec3> sample_surfaces(const World& world, double spacing);

struct Waypoint {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
};

enum class Profile { kSmoothSpline, kPiecewiseArc };

struct TrajectorySpec {
  std::vector<Waypoint> waypoints;
  double speed = 2.0;
  double duration = 60.0;
  Profile profile = Profile::kSmoothSpline;
  bool closed = true;  ///< wrap from the last waypoint back to the first
};

/// Exact kinematics of the IMU frame at one instant.
struct TruthSample {
  double t = 0.0;
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 acc = Vec3::Zero();         ///< world-frame dv/dt
  Vec3 omega_body = Vec3::Zero();  ///< body-frame angular velocity
};

class Motion {
 public:
  virtual ~Motion() = default;
  virtual TruthSample at(double t) const = 0;
};

/// Straight-line translation with a constant yaw rate. Both position and
/// attitude are exactly linear in time.
class ConstantRateMotion : public Motion {
 public:
  ConstantRateMotion(const Vec3& p0, const Vec3& velocity, double yaw0, double yaw_rate);
  TruthSample at(double t) const override;

 private:
  Vec3 p0_;
  Vec3 vel_;
  double yaw0_;
  double yaw_rate_;
};

class GroundTruth {
 public:
  GroundTruth(std::shared_ptr<const Motion> motion, double duration);

  TruthSample at(double t) const { return motion_->at(t); }
  double duration() const { return duration_; }

  /// Samples at t = k / rate for k = 0 .. floor(duration * rate).
  std::vector<TruthSample> sample(double rate) const;

 private:
  std::shared_ptr<const Motion> motion_;
  double duration_;
};

/// Throws ValidationError for fewer than two waypoints, coincident
/// consecutive waypoints, non-positive speed, or an open path shorter than
/// the requested duration.
GroundTruth gen_truth(const TrajectorySpec& spec);

struct SensorSpec {
  double lidar_rate = 10.0;
  double imu_rate = 100.0;
  int lidar_channels = 16;
  double vertical_fov_deg = 15.0;  ///< channels span [-fov, +fov]
  int horizontal_samples = 360;    ///< columns per sweep
  double min_range = 0.5;
  double max_range = 80.0;
  double lidar_noise_std = 0.0;
  double gyro_noise_std = 0.0;
  double acc_noise_std = 0.0;
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 acc_bias = Vec3::Zero();
  std::vector<std::pair<double, double>> dropout_windows;  ///< IMU silent on [t0, t1]
  Mat3 rot_il = Mat3::Identity();
  Vec3 pos_il = Vec3::Zero();
  double gravity = 9.81;

  void validate(double duration) const;
};

/// gyro = omega + b_g + n, acc = R^T (dv/dt - g) + b_a + n, g = (0, 0, -gravity).
std::vector<ImuSample> sim_imu(const GroundTruth& gt, const SensorSpec& spec, std::uint64_t seed);

/// Spinning multi-channel LiDAR; scans stamped at sweep end, t_end = k / lidar_rate.
std::vector<Scan> sim_lidar(const World& world, const GroundTruth& gt, const SensorSpec& spec,
                            std::uint64_t seed);

/// Ranges along each ray (NaN on miss); ray i starts at origins[i].
std::vector<double> raycast(const std::vector<Rect>& planes, const std::vector<Vec3>& origins,
                            const std::vector<Vec3>& dirs, double min_range, double max_range);
std::vector<double> raycast_serial(const std::vector<Rect>& planes, const std::vector<Vec3>& origins,
                                   const std::vector<Vec3>& dirs, double min_range, double max_range);

}  // namespace dmloc::sim
