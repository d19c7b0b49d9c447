#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace dmloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Axis-aligned box, inclusive on both ends.
struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  static Aabb of(const Vec3& lo, const Vec3& hi) { return Aabb{lo, hi}; }

  bool empty() const { return (min.array() > max.array()).any(); }
  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  bool contains(const Aabb& b) const {
    return (b.min.array() >= min.array()).all() && (b.max.array() <= max.array()).all();
  }
  bool intersects(const Aabb& b) const {
    return (b.max.array() >= min.array()).all() && (b.min.array() <= max.array()).all();
  }
  /// Squared distance from p to the box (0 inside).
  double squared_distance(const Vec3& p) const {
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      if (p[i] < min[i]) {
        const double d = min[i] - p[i];
        d2 += d * d;
      } else if (p[i] > max[i]) {
        const double d = p[i] - max[i];
        d2 += d * d;
      }
    }
    return d2;
  }
};

/// Bad input or configuration: rejected before any work is done.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent data discovered while running.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dmloc
