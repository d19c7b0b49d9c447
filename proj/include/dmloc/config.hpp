#pragma once

#include "dmloc/estimator.hpp"
#include "dmloc/lidar_meas.hpp"
#include "dmloc/map.hpp"
#include "dmloc/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dmloc {

struct ExtrinsicConfig {
  Vec3 rpy_deg = Vec3::Zero();  ///< LiDAR attitude in the IMU frame
  Vec3 pos = Vec3::Zero();      ///< LiDAR origin in the IMU frame, m

  Mat3 rot() const;
};

struct InitConfig {
  InitialUncertainty sigma;
  Vec3 pos_offset = Vec3::Zero();     ///< added to the reference start position
  Vec3 rpy_offset_deg = Vec3::Zero(); ///< right-multiplied onto the reference attitude
  int gravity_window = 1;             ///< accelerometer samples averaged for the gravity seed
};

struct MapConfig {
  bool use_prior_map = true;
  bool use_local_map = true;
  int prior_stride = 1;
  double local_radius = 150.0;
  double local_voxel = 0.5;
  double prior_spacing = 0.4;       ///< surface sampling pitch used by simgen
  double prior_hole_fraction = 0.0; ///< share of the map x-extent cut out of the prior
  bool prior_binary = true;
  bool prior_from_survey = false;   ///< simgen builds the prior from a separate noisy survey drive
  double build_voxel = 0.2;         ///< mapbuild voxel size
  MovableProfile movable;
};

struct SimConfig {
  sim::WorldKind world = sim::WorldKind::kBoxRoom;
  std::uint64_t seed = 1;          ///< world layout
  std::uint64_t noise_seed = 1;    ///< sensor noise of the recorded run
  std::uint64_t survey_seed = 1001;  ///< sensor noise of the prior-map survey drive
  double duration = 60.0;
  double speed = 1.5;
  sim::Profile profile = sim::Profile::kSmoothSpline;
  bool closed = true;
  std::vector<sim::Waypoint> waypoints;  ///< empty: default loop of the world kind
  double gt_rate = 200.0;
  sim::SensorSpec sensors;
};

struct EvalConfig {
  double max_dt = 0.02;
  bool align = false;
};

/// Everything a run needs, loaded from one JSON document. Every section and
/// key is optional; unknown keys are rejected.
struct RunConfig {
  FilterConfig filter;
  InitConfig init;
  AssociationConfig association;
  MapConfig map;
  SimConfig sim;
  EvalConfig eval;
  ExtrinsicConfig extrinsic;

  /// Throws ValidationError naming the offending key.
  void validate() const;

  /// Waypoints used by the simulator: the configured ones or the world default.
  std::vector<sim::Waypoint> effective_waypoints() const;
};

/// Parses text (JSON) then applies `section.key=value` overrides, where
/// value is JSON (bare words are taken as strings). Throws ValidationError.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Canonical JSON with every key present, sorted.
std::string to_json(const RunConfig& cfg);

/// FNV-1a of to_json(cfg).
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace dmloc
