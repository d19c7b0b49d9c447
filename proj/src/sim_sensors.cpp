#include "dmloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace dmloc::sim {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(std::string("sensor spec: ") + what);
}

double clamped_normal(std::normal_distribution<double>& nd, std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::clamp(nd(rng) * sigma, -4.0 * sigma, 4.0 * sigma);
}

}  // namespace

void SensorSpec::validate(double duration) const {
  require(lidar_rate > 0.0 && std::isfinite(lidar_rate), "lidar_rate must be > 0");
  require(imu_rate > 0.0 && std::isfinite(imu_rate), "imu_rate must be > 0");
  require(lidar_channels >= 1, "lidar_channels must be >= 1");
  require(horizontal_samples >= 1, "horizontal_samples must be >= 1");
  require(vertical_fov_deg >= 0.0 && vertical_fov_deg < 90.0, "vertical_fov_deg must be in [0, 90)");
  require(min_range >= 0.0 && max_range > min_range, "need 0 <= min_range < max_range");
  require(lidar_noise_std >= 0.0 && gyro_noise_std >= 0.0 && acc_noise_std >= 0.0, "noise stds must be >= 0");
  require(gravity > 0.0, "gravity must be > 0");
  for (const auto& [t0, t1] : dropout_windows) {
    require(t0 < t1, "dropout window must have t0 < t1");
    require(t0 >= 0.0 && t1 <= duration, "dropout window outside the run duration");
  }
}

std::vector<ImuSample> sim_imu(const GroundTruth& gt, const SensorSpec& spec, std::uint64_t seed) {
  spec.validate(gt.duration());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const Vec3 g(0.0, 0.0, -spec.gravity);
  const auto n = static_cast<std::size_t>(std::floor(gt.duration() * spec.imu_rate + 1e-9));
  std::vector<ImuSample> out;
  out.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / spec.imu_rate;
    // Noise is drawn for every slot so a dropout does not shift the
    // sequence seen by later samples.
    Vec3 ng, na;
    for (int i = 0; i < 3; ++i) ng[i] = spec.gyro_noise_std * nd(rng);
    for (int i = 0; i < 3; ++i) na[i] = spec.acc_noise_std * nd(rng);
    const bool dropped = std::any_of(spec.dropout_windows.begin(), spec.dropout_windows.end(),
                                     [t](const auto& w) { return t >= w.first && t <= w.second; });
    if (dropped) continue;
    const TruthSample s = gt.at(t);
    ImuSample m;
    m.t = t;
    m.gyro = s.omega_body + spec.gyro_bias + ng;
    m.acc = s.rot.transpose() * (s.acc - g) + spec.acc_bias + na;
    out.push_back(m);
  }
  return out;
}

std::vector<Scan> sim_lidar(const World& world, const GroundTruth& gt, const SensorSpec& spec,
                            std::uint64_t seed) {
  spec.validate(gt.duration());
  const int nh = spec.horizontal_samples;
  const int nc = spec.lidar_channels;
  const double period = 1.0 / spec.lidar_rate;
  const double fov = spec.vertical_fov_deg * std::numbers::pi / 180.0;

  // Beam directions in the LiDAR frame, indexed [column][channel].
  std::vector<Vec3> beams(static_cast<std::size_t>(nh * nc));
  for (int j = 0; j < nh; ++j) {
    const double az = 2.0 * std::numbers::pi * (nh - 1 - j) / nh;
    for (int c = 0; c < nc; ++c) {
      const double el = nc == 1 ? 0.0 : -fov + 2.0 * fov * c / (nc - 1);
      beams[static_cast<std::size_t>(j * nc + c)] =
          Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    }
  }

  std::vector<Aabb> boxes;
  for (const auto& r : world.planes) {
    Aabb b;
    b.extend(r.origin);
    b.extend(r.origin + r.edge_u);
    b.extend(r.origin + r.edge_v);
    b.extend(r.origin + r.edge_u + r.edge_v);
    boxes.push_back(b);
  }

  const auto count = static_cast<std::size_t>(std::floor(gt.duration() * spec.lidar_rate + 1e-9));
  std::vector<Scan> scans;
  scans.reserve(count);
  std::vector<Vec3> origins(beams.size()), dirs(beams.size());
  std::vector<double> dts(static_cast<std::size_t>(nh));
  for (std::size_t k = 1; k <= count; ++k) {
    Scan scan;
    scan.t_end = static_cast<double>(k) / spec.lidar_rate;
    Vec3 first = Vec3::Zero(), last = Vec3::Zero();
    for (int j = 0; j < nh; ++j) {
      const double dt = period * j / nh;
      dts[static_cast<std::size_t>(j)] = dt;
      const TruthSample s = gt.at(scan.t_end - dt);
      const Mat3 r_wl = s.rot * spec.rot_il;
      const Vec3 p_wl = s.rot * spec.pos_il + s.pos;
      if (j == 0) first = p_wl;
      last = p_wl;
      for (int c = 0; c < nc; ++c) {
        const auto i = static_cast<std::size_t>(j * nc + c);
        origins[i] = p_wl;
        dirs[i] = r_wl * beams[i];
      }
    }
    // Rectangles entirely out of range for the whole sweep cannot be hit.
    const double reach = spec.max_range + (last - first).norm();
    std::vector<Rect> visible;
    for (std::size_t i = 0; i < world.planes.size(); ++i) {
      if (boxes[i].squared_distance(first) <= reach * reach) visible.push_back(world.planes[i]);
    }
    const std::vector<double> ranges = raycast(visible, origins, dirs, spec.min_range, spec.max_range);

    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * k));
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int j = 0; j < nh; ++j) {
      for (int c = 0; c < nc; ++c) {
        const auto i = static_cast<std::size_t>(j * nc + c);
        const double noise = clamped_normal(nd, rng, spec.lidar_noise_std);
        if (std::isnan(ranges[i])) continue;
        scan.points.push_back({(ranges[i] + noise) * beams[i], dts[static_cast<std::size_t>(j)]});
      }
    }
    scans.push_back(std::move(scan));
  }
  return scans;
}

}  // namespace dmloc::sim
