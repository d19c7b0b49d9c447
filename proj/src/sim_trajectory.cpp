#include "dmloc/sim.hpp"

#include "dmloc/so3.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dmloc::sim {
namespace {

double wrap_pi(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

TruthSample planar_sample(double t, const Vec3& p, const Vec3& v, const Vec3& a) {
  TruthSample s;
  s.t = t;
  s.pos = p;
  s.vel = v;
  s.acc = a;
  const double h2 = v.x() * v.x() + v.y() * v.y();
  s.rot = so3::rot_z(std::atan2(v.y(), v.x()));
  s.omega_body = Vec3(0, 0, (v.x() * a.y() - v.y() * a.x()) / h2);
  return s;
}

// Quintic Hermite segment in normalized time tau = s / T.
struct QuinticSegment {
  double t0 = 0.0;
  double dur = 1.0;
  Vec3 c[6];

  void eval(double s, Vec3& p, Vec3& v, Vec3& a) const {
    const double u = s / dur;
    p = c[0] + u * (c[1] + u * (c[2] + u * (c[3] + u * (c[4] + u * c[5]))));
    const Vec3 dp = c[1] + u * (2 * c[2] + u * (3 * c[3] + u * (4 * c[4] + u * 5 * c[5])));
    const Vec3 ddp = 2 * c[2] + u * (6 * c[3] + u * (12 * c[4] + u * 20 * c[5]));
    v = dp / dur;
    a = ddp / (dur * dur);
  }
};

class SplineMotion : public Motion {
 public:
  SplineMotion(std::vector<QuinticSegment> segs, bool periodic)
      : segs_(std::move(segs)), periodic_(periodic), period_(segs_.back().t0 + segs_.back().dur) {}

  TruthSample at(double t) const override {
    double tau = t;
    if (periodic_) {
      tau = std::fmod(t, period_);
      if (tau < 0) tau += period_;
    } else {
      tau = std::clamp(t, 0.0, period_);
    }
    auto it = std::upper_bound(segs_.begin(), segs_.end(), tau,
                               [](double x, const QuinticSegment& s) { return x < s.t0; });
    const auto& seg = *(it == segs_.begin() ? it : std::prev(it));
    Vec3 p, v, a;
    seg.eval(std::min(tau - seg.t0, seg.dur), p, v, a);
    return planar_sample(t, p, v, a);
  }

 private:
  std::vector<QuinticSegment> segs_;
  bool periodic_;
  double period_;
};

// Constant-curvature arc, parameterized by arc length.
struct ArcSegment {
  double t0 = 0.0;
  double dur = 0.0;
  Vec3 p0 = Vec3::Zero();
  double yaw0 = 0.0;
  double kappa = 0.0;
  double climb = 0.0;  ///< dz / ds
};

class ArcMotion : public Motion {
 public:
  ArcMotion(std::vector<ArcSegment> segs, double speed) : segs_(std::move(segs)), speed_(speed) {}

  TruthSample at(double t) const override {
    auto it = std::upper_bound(segs_.begin(), segs_.end(), t,
                               [](double x, const ArcSegment& s) { return x < s.t0; });
    const auto& g = *(it == segs_.begin() ? it : std::prev(it));
    const double s = speed_ * std::clamp(t - g.t0, 0.0, g.dur);
    const double yaw = g.yaw0 + g.kappa * s;
    Vec3 p = g.p0;
    if (std::abs(g.kappa) < 1e-12) {
      p += Vec3(std::cos(g.yaw0) * s, std::sin(g.yaw0) * s, 0.0);
    } else {
      p += Vec3((std::sin(yaw) - std::sin(g.yaw0)) / g.kappa, (std::cos(g.yaw0) - std::cos(yaw)) / g.kappa,
                0.0);
    }
    p.z() += g.climb * s;
    TruthSample out;
    out.t = t;
    out.pos = p;
    out.vel = speed_ * Vec3(std::cos(yaw), std::sin(yaw), g.climb);
    out.acc = speed_ * speed_ * g.kappa * Vec3(-std::sin(yaw), std::cos(yaw), 0.0);
    out.rot = so3::rot_z(yaw);
    out.omega_body = Vec3(0, 0, speed_ * g.kappa);
    return out;
  }

 private:
  std::vector<ArcSegment> segs_;
  double speed_;
};

void check_waypoints(const TrajectorySpec& spec) {
  if (spec.waypoints.size() < 2) throw ValidationError("trajectory needs at least 2 waypoints");
  if (!(spec.speed > 0.0) || !std::isfinite(spec.speed)) throw ValidationError("trajectory speed must be > 0");
  if (!(spec.duration > 0.0) || !std::isfinite(spec.duration)) {
    throw ValidationError("trajectory duration must be > 0");
  }
  const std::size_t n = spec.waypoints.size();
  const std::size_t pairs = spec.closed ? n : n - 1;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Vec3 d = spec.waypoints[(i + 1) % n].position - spec.waypoints[i].position;
    if (Vec3(d.x(), d.y(), 0).norm() < 1e-6) {
      throw ValidationError("coincident waypoints " + std::to_string(i) + " and " +
                            std::to_string((i + 1) % n));
    }
  }
}

std::shared_ptr<const Motion> make_spline(const TrajectorySpec& spec) {
  const auto& w = spec.waypoints;
  const std::size_t n = w.size();
  auto pt = [&](std::ptrdiff_t i) {
    const auto m = static_cast<std::ptrdiff_t>(n);
    return w[static_cast<std::size_t>(((i % m) + m) % m)].position;
  };
  std::vector<Vec3> vel(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i);
    Vec3 d;
    if (spec.closed) {
      d = pt(k + 1) - pt(k - 1);
    } else {
      d = pt(std::min<std::ptrdiff_t>(k + 1, static_cast<std::ptrdiff_t>(n) - 1)) - pt(std::max<std::ptrdiff_t>(k - 1, 0));
    }
    if (d.norm() < 1e-9) d = pt(k + 1) - pt(k);
    vel[i] = spec.speed * d.normalized();
  }
  std::vector<QuinticSegment> segs;
  const std::size_t count = spec.closed ? n : n - 1;
  double t0 = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = (i + 1) % n;
    QuinticSegment s;
    s.t0 = t0;
    s.dur = (w[j].position - w[i].position).norm() / spec.speed;
    const double T = s.dur;
    const Vec3 P = w[j].position - w[i].position - vel[i] * T;
    const Vec3 V = (vel[j] - vel[i]) * T;
    s.c[0] = w[i].position;
    s.c[1] = vel[i] * T;
    s.c[2] = Vec3::Zero();
    s.c[3] = 10 * P - 4 * V;
    s.c[4] = -15 * P + 7 * V;
    s.c[5] = 6 * P - 3 * V;
    segs.push_back(s);
    t0 += T;
  }
  if (!spec.closed && t0 + 1e-9 < spec.duration) {
    throw ValidationError("open trajectory is shorter than the requested duration");
  }
  return std::make_shared<SplineMotion>(std::move(segs), spec.closed);
}

std::shared_ptr<const Motion> make_arcs(const TrajectorySpec& spec) {
  const auto& w = spec.waypoints;
  const std::size_t n = w.size();
  std::vector<ArcSegment> segs;
  Vec3 p = w[0].position;
  double yaw = w[0].yaw;
  double t0 = 0.0;
  // Closed paths keep cycling through the waypoints so heading stays continuous.
  for (std::size_t i = 1; t0 < spec.duration; ++i) {
    if (!spec.closed && i >= n) throw ValidationError("open trajectory is shorter than the requested duration");
    const Vec3 target = w[i % n].position;
    const Vec3 d = target - p;
    const double chord = Vec3(d.x(), d.y(), 0).norm();
    if (chord < 1e-6) throw ValidationError("coincident waypoints");
    const double alpha = wrap_pi(std::atan2(d.y(), d.x()) - yaw);
    if (std::abs(std::abs(alpha) - std::numbers::pi) < 1e-9) {
      throw ValidationError("waypoint directly behind the current heading");
    }
    ArcSegment g;
    g.t0 = t0;
    g.p0 = p;
    g.yaw0 = yaw;
    g.kappa = 2.0 * std::sin(alpha) / chord;
    const double len = std::abs(alpha) < 1e-12 ? chord : alpha * chord / std::sin(alpha);
    g.climb = d.z() / len;
    g.dur = len / spec.speed;
    segs.push_back(g);
    p = target;
    yaw = yaw + 2.0 * alpha;
    t0 += g.dur;
  }
  return std::make_shared<ArcMotion>(std::move(segs), spec.speed);
}

}  // namespace

ConstantRateMotion::ConstantRateMotion(const Vec3& p0, const Vec3& velocity, double yaw0, double yaw_rate)
    : p0_(p0), vel_(velocity), yaw0_(yaw0), yaw_rate_(yaw_rate) {}

TruthSample ConstantRateMotion::at(double t) const {
  TruthSample s;
  s.t = t;
  s.pos = p0_ + vel_ * t;
  s.vel = vel_;
  s.rot = so3::rot_z(yaw0_ + yaw_rate_ * t);
  s.omega_body = Vec3(0, 0, yaw_rate_);
  return s;
}

GroundTruth::GroundTruth(std::shared_ptr<const Motion> motion, double duration)
    : motion_(std::move(motion)), duration_(duration) {}

std::vector<TruthSample> GroundTruth::sample(double rate) const {
  const auto n = static_cast<std::size_t>(std::floor(duration_ * rate + 1e-9));
  std::vector<TruthSample> out;
  out.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out.push_back(at(static_cast<double>(k) / rate));
  return out;
}

GroundTruth gen_truth(const TrajectorySpec& spec) {
  check_waypoints(spec);
  auto motion = spec.profile == Profile::kSmoothSpline ? make_spline(spec) : make_arcs(spec);
  return GroundTruth(std::move(motion), spec.duration);
}

}  // namespace dmloc::sim
