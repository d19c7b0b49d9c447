#pragma once

#include "dmloc/gain.hpp"
#include "dmloc/ikd_tree.hpp"
#include "dmloc/state_history.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dmloc {

/// A return in the LiDAR frame, captured dt seconds before the scan's t_end.
struct LidarPoint {
  Vec3 xyz = Vec3::Zero();
  double dt = 0.0;
};

/// One sweep, stamped at its end. Points are ordered by ascending dt.
struct Scan {
  double t_end = 0.0;
  std::vector<LidarPoint> points;
};

struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();
  Vec3 anchor = Vec3::Zero();
  double rms = 0.0;
  bool valid = false;
};

enum class MapSource : std::uint8_t { kGlobal, kLocal };

struct Correspondence {
  Vec3 point_l = Vec3::Zero();
  PlaneFit plane;
  MapSource source = MapSource::kGlobal;
  double noise_std = 0.05;
};

struct AssociationConfig {
  int plane_min_points = 5;
  double plane_fit_threshold = 0.1;  ///< max neighbor distance from the fitted plane
  double assoc_gate = 0.5;           ///< max |point-to-plane| residual accepted
  double knn_max_dist = 5.0;
  int downsample_stride = 4;
  double point_noise_std = 0.05;     ///< run configs take this from the filter settings
  double global_weight = 1.0;
  double local_weight = 1.0;

  void validate() const;
};

struct UndistortResult {
  Scan scan;
  std::size_t dropped = 0;
};

/// Re-expresses every point in the LiDAR frame at t_end using the pose
/// history. Points whose capture time falls outside the history are dropped.
UndistortResult undistort(const Scan& scan, const StateHistory& history);

/// Least-squares plane; normal is the smallest-eigenvalue direction of the
/// centered scatter, oriented toward viewpoint. Valid iff there are enough
/// points, the neighborhood is not collinear and every point lies within
/// plane_fit_threshold of the plane.
PlaneFit fit_plane(std::span<const Vec3> neighbors, const Vec3& viewpoint,
                   const AssociationConfig& cfg = {});

/// World-frame point: R_wi (R_il p + p_il) + p_wi.
Vec3 lidar_to_world(const NavState& x, const Vec3& p_l);

/// Up to one correspondence per point and map. Output lists every GLOBAL
/// correspondence in point order, then every LOCAL one. Either map may be null.
std::vector<Correspondence> associate(std::span<const Vec3> points_l, const NavState& pose,
                                      const IkdTree* global_map, const IkdTree* local_map,
                                      const AssociationConfig& cfg);

/// Single-threaded reference for associate().
std::vector<Correspondence> associate_serial(std::span<const Vec3> points_l, const NavState& pose,
                                             const IkdTree* global_map, const IkdTree* local_map,
                                             const AssociationConfig& cfg);

/// Signed point-to-plane distance u^T (T_wi T_il p - q).
double residual_p2plane(const NavState& x, const Correspondence& c);

using JacobianRow = Eigen::Matrix<double, 1, kStateDim>;

/// d residual / d error-state, extrinsic columns included.
JacobianRow residual_jacobian(const NavState& x, const Correspondence& c);

/// Stacks one row per correspondence in input order; r_inv = weight / std^2.
MeasurementSystem build_system(const NavState& x, std::span<const Correspondence> cs,
                               const AssociationConfig& cfg);

}  // namespace dmloc
