#include "dmloc/sim.hpp"

#include "dmloc/kernels.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <random>

namespace dmloc::sim {
namespace {

void add_box(std::vector<Rect>& out, const Vec3& lo, const Vec3& hi, bool with_floor) {
  const Vec3 d = hi - lo;
  const Vec3 ex(d.x(), 0, 0), ey(0, d.y(), 0), ez(0, 0, d.z());
  out.push_back({lo, ex, ez});                   // y = lo
  out.push_back({lo + ey, ex, ez});              // y = hi
  out.push_back({lo, ey, ez});                   // x = lo
  out.push_back({lo + ex, ey, ez});              // x = hi
  out.push_back({lo + ez, ex, ey});              // top
  if (with_floor) out.push_back({lo, ex, ey});
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

namespace {

// Plane normal and the dual basis of (edge_u, edge_v), so that the rectangle
// coordinates of an in-plane offset q are (q . du, q . dv).
struct PreparedRect {
  Vec3 origin;
  Vec3 normal;
  Vec3 du;
  Vec3 dv;
  double normal_norm = 0.0;
};

PreparedRect prepare(const Rect& rect) {
  PreparedRect p;
  p.origin = rect.origin;
  p.normal = rect.edge_u.cross(rect.edge_v);
  p.normal_norm = p.normal.norm();
  const double uu = rect.edge_u.squaredNorm();
  const double uv = rect.edge_u.dot(rect.edge_v);
  const double vv = rect.edge_v.squaredNorm();
  const double det = uu * vv - uv * uv;
  p.du = (vv * rect.edge_u - uv * rect.edge_v) / det;
  p.dv = (uu * rect.edge_v - uv * rect.edge_u) / det;
  return p;
}

std::optional<double> intersect_prepared(const PreparedRect& r, const Vec3& origin, const Vec3& dir) {
  const double denom = r.normal.dot(dir);
  if (std::abs(denom) < 1e-12 * r.normal_norm * dir.norm()) return std::nullopt;
  const double t = r.normal.dot(r.origin - origin) / denom;
  if (!(t > 0.0)) return std::nullopt;
  const Vec3 q = origin + t * dir - r.origin;
  const double a = q.dot(r.du);
  const double b = q.dot(r.dv);
  if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) return std::nullopt;
  return t;
}

}  // namespace

std::optional<double> intersect(const Rect& rect, const Vec3& origin, const Vec3& dir) {
  return intersect_prepared(prepare(rect), origin, dir);
}

std::size_t port_plane_count(const PortLayout& layout) {
  return 1 + 5 * static_cast<std::size_t>(layout.container_rows * layout.container_cols) +
         4 * static_cast<std::size_t>(layout.pillars);
}

World gen_world(WorldKind kind, std::uint64_t seed) {
  World w;
  w.kind = kind;
  w.seed = seed;
  if (kind == WorldKind::kBoxRoom) {
    add_box(w.planes, Vec3(-12, -8, 0), Vec3(12, 8, 6), true);
    return w;
  }

  std::mt19937_64 rng(seed);
  const PortLayout layout;
  // Yard surface.
  w.planes.push_back({Vec3(-30, -40, 0), Vec3(160, 0, 0), Vec3(0, 120, 0)});

  // Container stacks in rows along x; the middle rows sit inside the
  // default loop, the outer ones line the far side of each lane.
  const double row_y[4] = {-16.0, 11.0, 26.5, 53.5};
  constexpr double kWidth = 2.44;
  constexpr double kTier = 2.59;
  for (int r = 0; r < layout.container_rows; ++r) {
    for (int c = 0; c < layout.container_cols; ++c) {
      const double length = uniform(rng, 0.0, 1.0) < 0.5 ? 6.06 : 12.19;
      const double x0 = 6.0 + 11.5 * c + uniform(rng, 0.0, 11.0 - std::min(length, 11.0));
      const double y0 = row_y[r % 4] + uniform(rng, -0.5, 0.5);
      const int tiers = 1 + static_cast<int>(uniform(rng, 0.0, 3.0));
      add_box(w.planes, Vec3(x0, y0, 0.0), Vec3(x0 + std::min(length, 11.0), y0 + kWidth, kTier * tiers),
              false);
    }
  }

  // Crane legs.
  const double legs[8][2] = {{-10, -28}, {-10, 68}, {90, -28}, {90, 68},
                             {40, -28},  {40, 68},  {-12, 20}, {92, 20}};
  for (int i = 0; i < layout.pillars; ++i) {
    const Vec3 lo(legs[i % 8][0] + uniform(rng, -1, 1), legs[i % 8][1] + uniform(rng, -1, 1), 0.0);
    const Vec3 hi = lo + Vec3(1.2, 1.2, uniform(rng, 15.0, 25.0));
    std::vector<Rect> faces;
    add_box(faces, lo, hi, false);
    faces.pop_back();  // the top is out of reach of the sensor
    w.planes.insert(w.planes.end(), faces.begin(), faces.end());
  }
  return w;
}

std::vector<Vec3> sample_surfaces(const World& world, double spacing) {
  std::vector<Vec3> pts;
  for (const auto& r : world.planes) {
    const int nu = std::max(1, static_cast<int>(std::ceil(r.edge_u.norm() / spacing)));
    const int nv = std::max(1, static_cast<int>(std::ceil(r.edge_v.norm() / spacing)));
    for (int i = 0; i <= nu; ++i) {
      for (int j = 0; j <= nv; ++j) {
        pts.push_back(r.origin + (static_cast<double>(i) / nu) * r.edge_u +
                      (static_cast<double>(j) / nv) * r.edge_v);
      }
    }
  }
  return pts;
}

namespace {

std::vector<PreparedRect> prepare_all(const std::vector<Rect>& planes) {
  std::vector<PreparedRect> out;
  out.reserve(planes.size());
  for (const auto& p : planes) out.push_back(prepare(p));
  return out;
}

double cast_one(const std::vector<PreparedRect>& planes, const Vec3& o, const Vec3& d,
                double min_range, double max_range) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : planes) {
    const auto t = intersect_prepared(p, o, d);
    if (t && *t >= min_range && *t <= max_range && *t < best) best = *t;
  }
  return std::isinf(best) ? std::numeric_limits<double>::quiet_NaN() : best;
}

}  // namespace

std::vector<double> raycast(const std::vector<Rect>& planes, const std::vector<Vec3>& origins,
                            const std::vector<Vec3>& dirs, double min_range, double max_range) {
  const auto prepared = prepare_all(planes);
  std::vector<double> out(dirs.size());
  kernels::parallel_for(static_cast<std::ptrdiff_t>(dirs.size()), [&](std::ptrdiff_t i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = cast_one(prepared, origins[k], dirs[k], min_range, max_range);
  });
  return out;
}

std::vector<double> raycast_serial(const std::vector<Rect>& planes, const std::vector<Vec3>& origins,
                                   const std::vector<Vec3>& dirs, double min_range, double max_range) {
  const auto prepared = prepare_all(planes);
  std::vector<double> out(dirs.size());
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    out[k] = cast_one(prepared, origins[k], dirs[k], min_range, max_range);
  }
  return out;
}

}  // namespace dmloc::sim
