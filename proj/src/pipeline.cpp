#include "dmloc/pipeline.hpp"

#include "dmloc/io.hpp"
#include "dmloc/so3.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace dmloc {
namespace {

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw DataError("manifest: bad " + what);
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

void emit(eval::Trajectory& traj, double t, const NavState& x) {
  if (!traj.empty() && traj.back().t == t) {
    traj.back().pos = x.pos_wi;
    traj.back().rot = x.rot_wi;
    return;
  }
  traj.push_back({t, x.pos_wi, x.rot_wi});
}

const char* mode_name(Mode m) { return m == Mode::kImuDriven ? "imu" : "cv"; }

}  // namespace

Dataset generate_dataset(const RunConfig& cfg) {
  cfg.validate();
  const auto& sc = cfg.sim;
  sim::TrajectorySpec spec;
  spec.waypoints = cfg.effective_waypoints();
  spec.speed = sc.speed;
  spec.duration = sc.duration;
  spec.profile = sc.profile;
  spec.closed = sc.closed;
  const sim::GroundTruth gt = sim::gen_truth(spec);

  sim::SensorSpec sensors = sc.sensors;
  sensors.rot_il = cfg.extrinsic.rot();
  sensors.pos_il = cfg.extrinsic.pos;

  const sim::World world = sim::gen_world(sc.world, sc.seed);
  Dataset ds;
  ds.imu = sim::sim_imu(gt, sensors, sc.noise_seed);
  ds.scans = sim::sim_lidar(world, gt, sensors, sc.noise_seed + 1);
  for (const auto& s : gt.sample(sc.gt_rate)) ds.truth.push_back({s.t, s.pos, s.rot});
  if (cfg.map.prior_from_survey) {
    // Same route driven again with independent sensor noise, mapped with
    // the true poses.
    const auto survey = sim::sim_lidar(world, gt, sensors, sc.survey_seed);
    ds.prior_points = build_prior_map(cfg, survey, ds.truth);
  } else {
    ds.prior_points = cut_prior_hole(sim::sample_surfaces(world, cfg.map.prior_spacing), cfg.map.prior_hole_fraction);
  }
  const sim::TruthSample s0 = gt.at(0.0);
  ds.start = {0.0, s0.pos, s0.rot, s0.vel};
  return ds;
}

std::vector<Vec3> cut_prior_hole(const std::vector<Vec3>& pts, double fraction) {
  if (fraction <= 0.0 || pts.empty()) return pts;
  Aabb b;
  for (const auto& p : pts) b.extend(p);
  const double c = 0.5 * (b.min.x() + b.max.x());
  const double half = 0.5 * fraction * (b.max.x() - b.min.x());
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    if (p.x() < c - half || p.x() > c + half) out.push_back(p);
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds, const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

  const char* prior_name = cfg.map.prior_binary ? files::kPriorBinary : files::kPriorText;
  write_map_points(dir / prior_name, ds.prior_points, cfg.map.prior_binary ? MapFormat::kBinary : MapFormat::kText);
  io::write_imu_csv(dir / files::kImu, ds.imu);
  io::write_scans(dir / files::kScans, ds.scans);
  eval::write_tum(dir / files::kTruth, ds.truth);

  json m;
  m["format"] = "dmloc-dataset-1";
  m["seed"] = cfg.sim.seed;
  m["config_hash"] = hex(config_hash(cfg));
  m["config"] = json::parse(to_json(cfg));
  json rot = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(ds.start.rot(r, c));
  }
  m["start"] = {{"t", ds.start.t}, {"pos", vec_json(ds.start.pos)}, {"rot_rowmajor", rot}, {"vel", vec_json(ds.start.vel)}};
  m["files"] = {{"prior_map", prior_name}, {"imu", files::kImu}, {"scans", files::kScans}, {"ground_truth", files::kTruth}};
  m["counts"] = {{"imu", ds.imu.size()}, {"scans", ds.scans.size()}, {"ground_truth", ds.truth.size()},
                 {"prior_points", ds.prior_points.size()}};
  std::ofstream out(dir / files::kManifest, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / files::kManifest).string());
  out << m.dump(2) << '\n';
  if (!out) throw DataError("write failed for " + (dir / files::kManifest).string());
}

Dataset read_dataset(const std::filesystem::path& dir, bool need_prior) {
  const auto mpath = dir / files::kManifest;
  std::ifstream in(mpath, std::ios::binary);
  if (!in) throw DataError("cannot open " + mpath.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(mpath.string() + ": " + e.what());
  }
  Dataset ds;
  try {
    const auto& s = m.at("start");
    ds.start.t = s.at("t").get<double>();
    ds.start.pos = json_vec(s.at("pos"), "start.pos");
    ds.start.vel = json_vec(s.at("vel"), "start.vel");
    const auto& r = s.at("rot_rowmajor");
    if (!r.is_array() || r.size() != 9) throw DataError("manifest: bad start.rot_rowmajor");
    for (int i = 0; i < 9; ++i) ds.start.rot(i / 3, i % 3) = r[static_cast<std::size_t>(i)].get<double>();
    const auto& f = m.at("files");
    const auto prior = dir / f.at("prior_map").get<std::string>();
    if (std::filesystem::exists(prior)) {
      ds.prior_points = read_map_points(prior);
    } else if (need_prior) {
      throw DataError("prior map missing: " + prior.string());
    }
    ds.imu = io::read_imu_csv(dir / f.at("imu").get<std::string>());
    ds.scans = io::read_scans(dir / f.at("scans").get<std::string>());
    const auto truth = dir / f.at("ground_truth").get<std::string>();
    if (std::filesystem::exists(truth)) ds.truth = eval::read_tum(truth);
  } catch (const json::exception& e) {
    throw DataError(mpath.string() + ": " + e.what());
  }
  return ds;
}

LocalizeResult run_localization(const RunConfig& cfg, const Dataset& ds) {
  cfg.validate();
  if (cfg.map.use_prior_map && ds.prior_points.empty()) throw DataError("prior map is empty or missing");

  // Initial state: reference pose (optionally perturbed), gravity and
  // body-rate states seeded from the first accelerometer / gyro samples.
  NavState x0;
  x0.rot_wi = ds.start.rot * so3::from_rpy(cfg.init.rpy_offset_deg * kDeg);
  x0.pos_wi = ds.start.pos + cfg.init.pos_offset;
  x0.vel_wi = ds.start.vel;
  x0.rot_il = cfg.extrinsic.rot();
  x0.pos_il = cfg.extrinsic.pos;
  x0.gravity_w = Vec3(0, 0, -9.81);
  if (!ds.imu.empty()) {
    const auto n = std::min<std::size_t>(ds.imu.size(), static_cast<std::size_t>(cfg.init.gravity_window));
    Vec3 mean_acc = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) mean_acc += ds.imu[i].acc;
    mean_acc /= static_cast<double>(n);
    x0.gravity_w = -(x0.rot_wi * mean_acc);
    x0.omega = ds.imu.front().gyro;
    x0.acc = ds.imu.front().acc;
  }

  Estimator est(cfg.filter, x0, cfg.init.sigma.matrix(), ds.start.t);
  AssociationConfig assoc = cfg.association;
  assoc.point_noise_std = cfg.filter.lidar_point_noise_std;
  PriorMap prior;
  if (cfg.map.use_prior_map) prior = PriorMap(ds.prior_points, cfg.map.prior_stride);
  LocalMap local(LocalMap::Options{cfg.map.local_radius, cfg.map.local_voxel});

  LocalizeResult res;
  RunSummary& sum = res.summary;
  eval::Trajectory& traj = res.trajectory;
  emit(traj, est.current().t, est.current().state);

  double t_last = ds.start.t;
  if (!ds.imu.empty()) t_last = std::max(t_last, ds.imu.back().t);
  if (!ds.scans.empty()) t_last = std::max(t_last, ds.scans.back().t_end);
  const double period = cfg.filter.cv_timer_period;

  std::size_t ii = 0, is = 0, k = 1;
  Mode mode = est.mode();
  auto note_mode = [&](double t) {
    if (est.mode() != mode) {
      ++sum.mode_transitions;
      spdlog::info("t={:.3f} mode {} -> {}", t, mode_name(mode), mode_name(est.mode()));
      mode = est.mode();
    }
  };

  const double inf = std::numeric_limits<double>::infinity();
  while (true) {
    const double t_imu = ii < ds.imu.size() ? ds.imu[ii].t : inf;
    const double t_scan = is < ds.scans.size() ? ds.scans[is].t_end : inf;
    const double t_tick = ds.start.t + static_cast<double>(k) * period;
    const bool tick_due = t_tick <= t_last + 1e-9;
    if (t_imu == inf && t_scan == inf && !tick_due) break;

    if (t_imu <= t_scan && (t_imu <= t_tick || !tick_due)) {
      const ImuSample& u = ds.imu[ii++];
      ++sum.imu_samples;
      try {
        est.process_imu(u);
      } catch (const StaleSampleError& e) {
        ++sum.stale_imu;
        spdlog::warn("IMU sample {} rejected: {}", ii - 1, e.what());
      }
      note_mode(u.t);
    } else if (t_scan <= t_tick || !tick_due) {
      const Scan& scan = ds.scans[is++];
      ++sum.scans;
      try {
        est.predict_to(scan.t_end);
      } catch (const StaleSampleError& e) {
        ++sum.stale_scans;
        spdlog::warn("scan {} rejected: {}", is - 1, e.what());
        continue;
      }
      const UndistortResult und = undistort(scan, est.history());
      sum.dropped_points += und.dropped;
      std::vector<Vec3> pts;
      pts.reserve(und.scan.points.size());
      for (const auto& p : und.scan.points) pts.push_back(p.xyz);
      const std::vector<Vec3> sparse = interval_downsample(pts, assoc.downsample_stride);

      const IkdTree* global_tree = cfg.map.use_prior_map ? &prior.index() : nullptr;
      const IkdTree* local_tree = cfg.map.use_local_map && local.size() > 0 ? &local.index() : nullptr;
      const MeasurementProvider provider = [&](const NavState& x) {
        const auto cs = associate(sparse, x, global_tree, local_tree, assoc);
        return build_system(x, cs, assoc);
      };
      const LidarUpdateReport rep = est.iterated_lidar_update(provider);
      if (sum.lidar_updates == 0) sum.first_update = rep;
      ++sum.lidar_updates;
      sum.converged_updates += rep.converged ? 1 : 0;
      sum.degraded_updates += rep.degraded ? 1 : 0;
      sum.diverged_updates += rep.diverged ? 1 : 0;
      sum.total_iterations += static_cast<std::size_t>(rep.iterations);
      sum.total_correspondences += static_cast<std::size_t>(rep.measurements);
      if (spdlog::should_log(spdlog::level::debug)) {
        const NavState& x = est.current().state;
        spdlog::debug("t={:.3f} it={} n={} step={:.2e} v=({:.3f},{:.3f},{:.3f}) w=({:.3f},{:.3f},{:.3f}) "
                      "a=({:.3f},{:.3f},{:.3f}) g=({:.3f},{:.3f},{:.3f})",
                      scan.t_end, rep.iterations, rep.measurements, rep.last_step_norm, x.vel_wi.x(), x.vel_wi.y(),
                      x.vel_wi.z(), x.omega.x(), x.omega.y(), x.omega.z(), x.acc.x(), x.acc.y(), x.acc.z(),
                      x.gravity_w.x(), x.gravity_w.y(), x.gravity_w.z());
      }
      if (rep.degraded) spdlog::warn("t={:.3f} scan without correspondences", scan.t_end);
      if (rep.diverged) spdlog::warn("t={:.3f} iterated update diverged, prior kept", scan.t_end);

      if (cfg.map.use_local_map) {
        const NavState& x = est.current().state;
        std::vector<Vec3> world;
        world.reserve(pts.size());
        for (const auto& p : pts) world.push_back(lidar_to_world(x, p));
        local.insert(world);
        if (local.needs_prune(x.pos_wi)) local.prune(x.pos_wi);
      }
      emit(traj, est.current().t, est.current().state);
    } else {
      ++k;
      ++sum.ticks;
      sum.cv_steps += static_cast<std::size_t>(est.cv_tick(t_tick));
      note_mode(t_tick);
      emit(traj, est.current().t, est.current().state);
    }
  }

  for (std::size_t i = 1; i < traj.size(); ++i) {
    sum.max_output_gap = std::max(sum.max_output_gap, traj[i].t - traj[i - 1].t);
  }
  return res;
}

std::string format_summary(const RunSummary& s) {
  std::ostringstream o;
  o << "imu_samples: " << s.imu_samples << '\n'
    << "scans: " << s.scans << '\n'
    << "timer_ticks: " << s.ticks << '\n'
    << "cv_steps: " << s.cv_steps << '\n'
    << "stale_imu: " << s.stale_imu << '\n'
    << "stale_scans: " << s.stale_scans << '\n'
    << "mode_transitions: " << s.mode_transitions << '\n'
    << "dropped_points: " << s.dropped_points << '\n'
    << "lidar_updates: " << s.lidar_updates << '\n'
    << "converged_updates: " << s.converged_updates << '\n'
    << "degraded_updates: " << s.degraded_updates << '\n'
    << "diverged_updates: " << s.diverged_updates << '\n'
    << "mean_iterations: "
    << (s.lidar_updates ? static_cast<double>(s.total_iterations) / static_cast<double>(s.lidar_updates) : 0.0)
    << '\n'
    << "mean_correspondences: "
    << (s.lidar_updates ? static_cast<double>(s.total_correspondences) / static_cast<double>(s.lidar_updates)
                        : 0.0)
    << '\n'
    << "first_update_iterations: " << s.first_update.iterations << '\n'
    << "first_update_converged: " << (s.first_update.converged ? "yes" : "no") << '\n'
    << "max_output_gap: " << s.max_output_gap << '\n';
  return o.str();
}

std::optional<eval::Pose> interpolate(const eval::Trajectory& traj, double t) {
  if (traj.empty() || t < traj.front().t || t > traj.back().t) return std::nullopt;
  auto it = std::lower_bound(traj.begin(), traj.end(), t, [](const eval::Pose& p, double v) { return p.t < v; });
  if (it->t == t) return *it;
  const eval::Pose& b = *it;
  const eval::Pose& a = *std::prev(it);
  const double s = (t - a.t) / (b.t - a.t);
  return eval::Pose{t, a.pos + s * (b.pos - a.pos), so3::slerp(a.rot, b.rot, s)};
}

std::vector<Vec3> build_prior_map(const RunConfig& cfg, const std::vector<Scan>& scans,
                                  const eval::Trajectory& truth) {
  const Mat3 r_il = cfg.extrinsic.rot();
  const Vec3 p_il = cfg.extrinsic.pos;
  const double inv = 1.0 / cfg.map.build_voxel;
  struct KeyHash {
    std::size_t operator()(const Eigen::Vector3i& k) const {
      return (static_cast<std::size_t>(k.x()) * 73856093u) ^ (static_cast<std::size_t>(k.y()) * 19349663u) ^
             (static_cast<std::size_t>(k.z()) * 83492791u);
    }
  };
  struct KeyEq {
    bool operator()(const Eigen::Vector3i& a, const Eigen::Vector3i& b) const { return a == b; }
  };
  std::unordered_set<Eigen::Vector3i, KeyHash, KeyEq> seen;
  std::vector<Vec3> pts;
  for (const auto& scan : scans) {
    for (const auto& p : scan.points) {
      const auto pose = interpolate(truth, scan.t_end - p.dt);
      if (!pose) continue;
      const Vec3 w = pose->rot * (r_il * p.xyz + p_il) + pose->pos;
      const Eigen::Vector3i key = (w * inv).array().floor().cast<int>();
      if (seen.insert(key).second) pts.push_back(w);
    }
  }
  return cut_prior_hole(remove_dynamic_objects(pts, cfg.map.movable), cfg.map.prior_hole_fraction);
}

}  // namespace dmloc
