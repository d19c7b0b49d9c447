#include "dmloc/lidar_meas.hpp"

#include "dmloc/kernels.hpp"
#include "dmloc/so3.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <optional>
#include <string>

namespace dmloc {

void AssociationConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("association config: ") + what);
  };
  require(plane_min_points >= 3, "plane_min_points must be >= 3");
  require(plane_fit_threshold > 0, "plane_fit_threshold must be > 0");
  require(assoc_gate > 0, "assoc_gate must be > 0");
  require(knn_max_dist > 0, "knn_max_dist must be > 0");
  require(downsample_stride >= 1, "downsample_stride must be >= 1");
  require(point_noise_std > 0, "point_noise_std must be > 0");
  require(global_weight > 0 && local_weight > 0, "map weights must be > 0");
}

UndistortResult undistort(const Scan& scan, const StateHistory& history) {
  UndistortResult out;
  out.scan.t_end = scan.t_end;
  out.scan.points.reserve(scan.points.size());

  const NavState end = history.query(scan.t_end);
  // T_L_end^-1 as (R, t): p_end = r_inv * p_world + t_inv.
  const Mat3 r_wl_end = end.rot_wi * end.rot_il;
  const Vec3 p_wl_end = end.rot_wi * end.pos_il + end.pos_wi;
  const Mat3 r_inv = r_wl_end.transpose();

  for (const auto& pt : scan.points) {
    if (pt.dt == 0.0) {
      out.scan.points.push_back(pt);
      continue;
    }
    NavState at;
    try {
      at = history.query(scan.t_end - pt.dt);
    } catch (const OutOfRangeError&) {
      ++out.dropped;
      continue;
    }
    const Vec3 world = lidar_to_world(at, pt.xyz);
    out.scan.points.push_back(LidarPoint{r_inv * (world - p_wl_end), pt.dt});
  }
  return out;
}

PlaneFit fit_plane(std::span<const Vec3> neighbors, const Vec3& viewpoint,
                   const AssociationConfig& cfg) {
  PlaneFit fit;
  const auto n = static_cast<double>(neighbors.size());
  if (static_cast<int>(neighbors.size()) < cfg.plane_min_points || neighbors.empty()) return fit;

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : neighbors) centroid += p;
  centroid /= n;
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : neighbors) {
    const Vec3 d = p - centroid;
    scatter.noalias() += d * d.transpose();
  }
  scatter /= n;

  const Eigen::SelfAdjointEigenSolver<Mat3> es(scatter);
  const Vec3 ev = es.eigenvalues();  // ascending
  fit.anchor = centroid;
  fit.normal = es.eigenvectors().col(0).normalized();
  if (fit.normal.dot(viewpoint - centroid) < 0.0) fit.normal = -fit.normal;

  // Collinear (or coincident) neighborhoods leave the normal undetermined.
  if (!(ev[1] > 1e-2 * std::max(ev[2], 1e-30)) || ev[2] <= 0.0) return fit;

  double max_dist = 0.0;
  double sum_sq = 0.0;
  for (const auto& p : neighbors) {
    const double d = fit.normal.dot(p - centroid);
    max_dist = std::max(max_dist, std::abs(d));
    sum_sq += d * d;
  }
  fit.rms = std::sqrt(sum_sq / n);
  fit.valid = max_dist <= cfg.plane_fit_threshold;
  return fit;
}

Vec3 lidar_to_world(const NavState& x, const Vec3& p_l) {
  return x.rot_wi * (x.rot_il * p_l + x.pos_il) + x.pos_wi;
}

namespace {

std::optional<PlaneFit> match(const IkdTree& map, const Vec3& world, const Vec3& viewpoint,
                              const AssociationConfig& cfg) {
  const auto nn = map.knn(world, cfg.plane_min_points, cfg.knn_max_dist);
  if (static_cast<int>(nn.size()) < cfg.plane_min_points) return std::nullopt;
  std::array<Vec3, 32> buf;
  std::vector<Vec3> heap_buf;
  std::span<Vec3> pts;
  if (nn.size() <= buf.size()) {
    for (std::size_t i = 0; i < nn.size(); ++i) buf[i] = nn[i].point;
    pts = std::span<Vec3>(buf.data(), nn.size());
  } else {
    for (const auto& q : nn) heap_buf.push_back(q.point);
    pts = heap_buf;
  }
  const PlaneFit fit = fit_plane(pts, viewpoint, cfg);
  if (!fit.valid) return std::nullopt;
  if (std::abs(fit.normal.dot(world - fit.anchor)) >= cfg.assoc_gate) return std::nullopt;
  return fit;
}

struct PointMatches {
  std::optional<PlaneFit> global;
  std::optional<PlaneFit> local;
};

template <class ForEach>
std::vector<Correspondence> associate_impl(std::span<const Vec3> points_l, const NavState& pose,
                                           const IkdTree* gmap, const IkdTree* lmap,
                                           const AssociationConfig& cfg, ForEach&& for_each) {
  const Vec3 viewpoint = pose.rot_wi * pose.pos_il + pose.pos_wi;
  std::vector<PointMatches> slots(points_l.size());
  for_each(static_cast<std::ptrdiff_t>(points_l.size()), [&](std::ptrdiff_t i) {
    const Vec3 world = lidar_to_world(pose, points_l[static_cast<std::size_t>(i)]);
    auto& s = slots[static_cast<std::size_t>(i)];
    if (gmap) s.global = match(*gmap, world, viewpoint, cfg);
    if (lmap) s.local = match(*lmap, world, viewpoint, cfg);
  });

  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].global) out.push_back({points_l[i], *slots[i].global, MapSource::kGlobal, cfg.point_noise_std});
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].local) out.push_back({points_l[i], *slots[i].local, MapSource::kLocal, cfg.point_noise_std});
  }
  return out;
}

}  // namespace

std::vector<Correspondence> associate(std::span<const Vec3> points_l, const NavState& pose,
                                      const IkdTree* global_map, const IkdTree* local_map,
                                      const AssociationConfig& cfg) {
  return associate_impl(points_l, pose, global_map, local_map, cfg,
                        [](std::ptrdiff_t n, auto&& fn) { kernels::parallel_for(n, fn); });
}

std::vector<Correspondence> associate_serial(std::span<const Vec3> points_l, const NavState& pose,
                                             const IkdTree* global_map, const IkdTree* local_map,
                                             const AssociationConfig& cfg) {
  return associate_impl(points_l, pose, global_map, local_map, cfg,
                        [](std::ptrdiff_t n, auto&& fn) { kernels::serial_for(n, fn); });
}

double residual_p2plane(const NavState& x, const Correspondence& c) {
  return c.plane.normal.dot(lidar_to_world(x, c.point_l) - c.plane.anchor);
}

JacobianRow residual_jacobian(const NavState& x, const Correspondence& c) {
  JacobianRow j = JacobianRow::Zero();
  const Vec3& u = c.plane.normal;
  const Vec3 in_imu = x.rot_il * c.point_l + x.pos_il;
  j.segment<3>(blk::kRot) = -u.transpose() * x.rot_wi * so3::hat(in_imu);
  j.segment<3>(blk::kPos) = u.transpose();
  j.segment<3>(blk::kRotIl) = -u.transpose() * x.rot_wi * x.rot_il * so3::hat(c.point_l);
  j.segment<3>(blk::kPosIl) = u.transpose() * x.rot_wi;
  return j;
}

MeasurementSystem build_system(const NavState& x, std::span<const Correspondence> cs,
                               const AssociationConfig& cfg) {
  MeasurementSystem sys;
  const auto m = static_cast<Eigen::Index>(cs.size());
  sys.h.resize(m, kStateDim);
  sys.r.resize(m);
  sys.r_inv.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& c = cs[static_cast<std::size_t>(i)];
    sys.h.row(i) = residual_jacobian(x, c);
    sys.r[i] = residual_p2plane(x, c);
    const double w = c.source == MapSource::kGlobal ? cfg.global_weight : cfg.local_weight;
    sys.r_inv[i] = w / (c.noise_std * c.noise_std);
  }
  return sys;
}

}  // namespace dmloc
