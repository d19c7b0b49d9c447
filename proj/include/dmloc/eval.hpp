#pragma once

#include "dmloc/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dmloc::eval {

struct Pose {
  double t = 0.0;
  Vec3 pos = Vec3::Zero();
  Mat3 rot = Mat3::Identity();
};

/// Ordered by strictly increasing t.
using Trajectory = std::vector<Pose>;

/// Throws DataError if stamps are not strictly increasing or values are not finite.
void validate(const Trajectory& traj, const std::string& name = "trajectory");

/// TUM format: `t tx ty tz qx qy qz qw` per line. Lines starting with '#'
/// are skipped. Errors name the file and line.
Trajectory read_tum(const std::filesystem::path& path);
Trajectory parse_tum(std::string_view text, const std::string& name = "<text>");
std::string format_tum(const Trajectory& traj);
void write_tum(const std::filesystem::path& path, const Trajectory& traj);

struct MatchedPair {
  Pose est;
  Pose gt;
  double dt = 0.0;  ///< |t_est - t_gt|
};

struct Association {
  std::vector<MatchedPair> pairs;
  std::size_t unmatched = 0;
};

/// Nearest ground-truth stamp within max_dt for each estimate (ties go to
/// the earlier stamp). Throws DataError if nothing matches.
Association associate_by_time(const Trajectory& est, const Trajectory& gt, double max_dt = 0.02);

/// Per-pair decomposition in the ground-truth heading frame (yaw only).
struct PairError {
  double t = 0.0;
  double abs = 0.0;
  double longitudinal = 0.0;  ///< signed, along heading
  double lateral = 0.0;       ///< signed, horizontal, left of heading
  double vertical = 0.0;      ///< signed, world z
  double rot = 0.0;           ///< geodesic angle, rad
};

PairError pair_error(const MatchedPair& p);

struct ErrorReport {
  double max_abs_pose_err = 0.0;
  double mean_abs_pose_err = 0.0;
  double max_lateral = 0.0;
  double mean_lateral = 0.0;
  double max_longitudinal = 0.0;
  double mean_longitudinal = 0.0;
  double max_vertical = 0.0;
  double mean_vertical = 0.0;
  double max_rot_err = 0.0;
  double mean_rot_err = 0.0;
  std::size_t matched_count = 0;
  std::size_t unmatched_count = 0;
};

/// Means and maxima of the magnitudes of each component. Needs >= 1 pair.
ErrorReport compute_report(std::span<const MatchedPair> pairs);

/// Rigidly aligns the estimates onto ground truth (least-squares, no scale).
/// Only for odometry-style comparisons; localization results are compared
/// in the shared map frame.
std::vector<MatchedPair> align_rigid(std::span<const MatchedPair> pairs);

/// `key: value` lines.
std::string format_report(const ErrorReport& r);

/// CSV with header t,abs,longitudinal,lateral,vertical,rot.
std::string format_pair_table(std::span<const MatchedPair> pairs);

}  // namespace dmloc::eval
