#pragma once

#include "dmloc/types.hpp"

namespace dmloc::so3 {

/// Below this angle (rad) exp/log and the Jacobians switch to Taylor expansions.
inline constexpr double kSmallAngle = 1e-7;

Mat3 hat(const Vec3& v);

/// Rodrigues: rotation about phi/|phi| by |phi|.
Mat3 exp(const Vec3& phi);

/// Inverse of exp; the returned angle lies in [0, pi].
Vec3 log(const Mat3& r);

/// Jr(phi) with exp(phi + d) ~= exp(phi) exp(Jr(phi) d).
Mat3 right_jacobian(const Vec3& phi);
Mat3 right_jacobian_inv(const Vec3& phi);

/// Geodesic interpolation a * exp(s * log(a^T b)).
Mat3 slerp(const Mat3& a, const Mat3& b, double s);

Mat3 rot_z(double yaw);
double yaw_of(const Mat3& r);

/// Rotation from roll/pitch/yaw (Z-Y-X convention), radians.
Mat3 from_rpy(const Vec3& rpy);

}  // namespace dmloc::so3
