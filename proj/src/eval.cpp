#include "dmloc/eval.hpp"

#include "dmloc/so3.hpp"
#include "text_util.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dmloc::eval {

void validate(const Trajectory& traj, const std::string& name) {
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (!std::isfinite(traj[i].t) || !traj[i].pos.allFinite() || !traj[i].rot.allFinite()) {
      throw DataError(name + ": non-finite pose at index " + std::to_string(i));
    }
    if (i > 0 && !(traj[i].t > traj[i - 1].t)) {
      throw DataError(name + ": stamps not strictly increasing at index " + std::to_string(i));
    }
  }
}

Trajectory parse_tum(std::string_view text, const std::string& name) {
  Trajectory out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    double v[8];
    if (!detail::parse_doubles(line, v, ' ')) {
      throw DataError(name + ":" + std::to_string(line_no) + ": expected 8 numbers `t tx ty tz qx qy qz qw`");
    }
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (q.norm() < 1e-6) throw DataError(name + ":" + std::to_string(line_no) + ": zero quaternion");
    out.push_back({v[0], Vec3(v[1], v[2], v[3]), q.normalized().toRotationMatrix()});
  }
  validate(out, name);
  return out;
}

Trajectory read_tum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open trajectory " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_tum(ss.str(), path.string());
}

std::string format_tum(const Trajectory& traj) {
  std::string s;
  s.reserve(traj.size() * 96);
  for (const auto& p : traj) {
    Eigen::Quaterniond q(p.rot);
    q.normalize();
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    const double v[8] = {p.t, p.pos.x(), p.pos.y(), p.pos.z(), q.x(), q.y(), q.z(), q.w()};
    for (int i = 0; i < 8; ++i) {
      if (i) s += ' ';
      detail::append_double(s, v[i]);
    }
    s += '\n';
  }
  return s;
}

void write_tum(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write trajectory " + path.string());
  out << format_tum(traj);
  if (!out) throw DataError("write failed for " + path.string());
}

Association associate_by_time(const Trajectory& est, const Trajectory& gt, double max_dt) {
  if (est.empty() || gt.empty()) throw DataError("associate_by_time: empty trajectory");
  Association a;
  for (const auto& e : est) {
    auto it = std::lower_bound(gt.begin(), gt.end(), e.t, [](const Pose& p, double t) { return p.t < t; });
    const Pose* best = nullptr;
    if (it != gt.begin()) best = &*std::prev(it);
    if (it != gt.end() && (!best || it->t - e.t < e.t - best->t)) best = &*it;
    const double dt = std::abs(best->t - e.t);
    if (dt <= max_dt) {
      a.pairs.push_back({e, *best, dt});
    } else {
      ++a.unmatched;
    }
  }
  if (a.pairs.empty()) throw DataError("associate_by_time: no estimate within max_dt of ground truth");
  return a;
}

PairError pair_error(const MatchedPair& p) {
  const Vec3 e = p.est.pos - p.gt.pos;
  const double yaw = so3::yaw_of(p.gt.rot);
  const Vec3 fwd(std::cos(yaw), std::sin(yaw), 0.0);
  const Vec3 left(-std::sin(yaw), std::cos(yaw), 0.0);
  PairError r;
  r.t = p.est.t;
  r.abs = e.norm();
  r.longitudinal = e.dot(fwd);
  r.lateral = e.dot(left);
  r.vertical = e.z();
  r.rot = so3::log(p.gt.rot.transpose() * p.est.rot).norm();
  return r;
}

ErrorReport compute_report(std::span<const MatchedPair> pairs) {
  if (pairs.empty()) throw DataError("compute_report: no matched pairs");
  ErrorReport r;
  r.matched_count = pairs.size();
  auto acc = [](double v, double& mx, double& sum) {
    mx = std::max(mx, std::abs(v));
    sum += std::abs(v);
  };
  for (const auto& p : pairs) {
    const PairError e = pair_error(p);
    acc(e.abs, r.max_abs_pose_err, r.mean_abs_pose_err);
    acc(e.lateral, r.max_lateral, r.mean_lateral);
    acc(e.longitudinal, r.max_longitudinal, r.mean_longitudinal);
    acc(e.vertical, r.max_vertical, r.mean_vertical);
    acc(e.rot, r.max_rot_err, r.mean_rot_err);
  }
  const auto n = static_cast<double>(pairs.size());
  r.mean_abs_pose_err /= n;
  r.mean_lateral /= n;
  r.mean_longitudinal /= n;
  r.mean_vertical /= n;
  r.mean_rot_err /= n;
  return r;
}

std::vector<MatchedPair> align_rigid(std::span<const MatchedPair> pairs) {
  Eigen::Matrix3Xd src(3, static_cast<Eigen::Index>(pairs.size()));
  Eigen::Matrix3Xd dst(3, static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    src.col(static_cast<Eigen::Index>(i)) = pairs[i].est.pos;
    dst.col(static_cast<Eigen::Index>(i)) = pairs[i].gt.pos;
  }
  const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
  const Mat3 r = t.topLeftCorner<3, 3>();
  const Vec3 p = t.topRightCorner<3, 1>();
  std::vector<MatchedPair> out(pairs.begin(), pairs.end());
  for (auto& m : out) {
    m.est.pos = r * m.est.pos + p;
    m.est.rot = r * m.est.rot;
  }
  return out;
}

std::string format_report(const ErrorReport& r) {
  std::string s;
  auto kv = [&s](const char* k, double v) {
    s += k;
    s += ": ";
    detail::append_double(s, v);
    s += '\n';
  };
  kv("max_abs_pose_err", r.max_abs_pose_err);
  kv("mean_abs_pose_err", r.mean_abs_pose_err);
  kv("max_lateral", r.max_lateral);
  kv("mean_lateral", r.mean_lateral);
  kv("max_longitudinal", r.max_longitudinal);
  kv("mean_longitudinal", r.mean_longitudinal);
  kv("max_vertical", r.max_vertical);
  kv("mean_vertical", r.mean_vertical);
  kv("max_rot_err", r.max_rot_err);
  kv("mean_rot_err", r.mean_rot_err);
  s += "matched_count: " + std::to_string(r.matched_count) + "\n";
  s += "unmatched_count: " + std::to_string(r.unmatched_count) + "\n";
  return s;
}

std::string format_pair_table(std::span<const MatchedPair> pairs) {
  std::string s = "t,abs,longitudinal,lateral,vertical,rot\n";
  for (const auto& p : pairs) {
    const PairError e = pair_error(p);
    const double v[6] = {e.t, e.abs, e.longitudinal, e.lateral, e.vertical, e.rot};
    for (int i = 0; i < 6; ++i) {
      if (i) s += ',';
      detail::append_double(s, v[i]);
    }
    s += '\n';
  }
  return s;
}

}  // namespace dmloc::eval
