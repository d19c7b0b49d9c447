#pragma once

#include "dmloc/config.hpp"
#include "dmloc/eval.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dmloc {

namespace files {
inline constexpr const char* kImu = "imu.csv";
inline constexpr const char* kScans = "scans.sc1";
inline constexpr const char* kTruth = "groundtruth.tum";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kPriorBinary = "prior_map.pmb";
inline constexpr const char* kPriorText = "prior_map.pm1";
}  // namespace files

/// Reference start of a run (the true state at the first stamp).
struct StartState {
  double t = 0.0;
  Vec3 pos = Vec3::Zero();
  Mat3 rot = Mat3::Identity();
  Vec3 vel = Vec3::Zero();
};

struct Dataset {
  std::vector<ImuSample> imu;
  std::vector<Scan> scans;
  std::vector<Vec3> prior_points;
  eval::Trajectory truth;
  StartState start;
};

/// Runs the simulator described by cfg.sim. Throws ValidationError first if
/// cfg is invalid.
Dataset generate_dataset(const RunConfig& cfg);

/// Removes every point whose x lies in the centered band covering `fraction`
/// of the x-extent.
std::vector<Vec3> cut_prior_hole(const std::vector<Vec3>& pts, double fraction);

/// Writes the prior map, IMU CSV, scan file, ground truth and manifest.
/// Nothing is written if the directory cannot be created.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds, const RunConfig& cfg);

/// Reads a directory produced by write_dataset. need_prior: a missing prior
/// map file is an error.
Dataset read_dataset(const std::filesystem::path& dir, bool need_prior = true);

struct RunSummary {
  std::size_t imu_samples = 0;
  std::size_t scans = 0;
  std::size_t ticks = 0;
  std::size_t cv_steps = 0;
  std::size_t stale_imu = 0;
  std::size_t stale_scans = 0;
  std::size_t mode_transitions = 0;
  std::size_t dropped_points = 0;
  std::size_t lidar_updates = 0;
  std::size_t converged_updates = 0;
  std::size_t degraded_updates = 0;
  std::size_t diverged_updates = 0;
  std::size_t total_iterations = 0;
  std::size_t total_correspondences = 0;
  LidarUpdateReport first_update;
  double max_output_gap = 0.0;
};

struct LocalizeResult {
  eval::Trajectory trajectory;
  RunSummary summary;
};

/// Replays the IMU stream, scan stream and timer ticks in timestamp order
/// through the estimator. Within a stream, file order is kept; an entry
/// that goes back in time is rejected as stale and counted.
LocalizeResult run_localization(const RunConfig& cfg, const Dataset& ds);

std::string format_summary(const RunSummary& s);

/// Offline prior map from ground-truth-posed scans: every point is placed
/// with the interpolated true pose at its capture time, voxel-thinned and
/// passed through the movable-object filter, then cut by
/// map.prior_hole_fraction.
std::vector<Vec3> build_prior_map(const RunConfig& cfg, const std::vector<Scan>& scans,
                                  const eval::Trajectory& truth);

/// Pose at t by linear / geodesic interpolation; nullopt outside the range.
std::optional<eval::Pose> interpolate(const eval::Trajectory& traj, double t);

}  // namespace dmloc
