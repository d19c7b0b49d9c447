#pragma once

#include "dmloc/types.hpp"

namespace dmloc {

inline constexpr int kStateDim = 30;

/// Block offsets into the error state. The ordering is a frozen contract
/// shared by ErrorVector, Covariance and every Jacobian in the library.
namespace blk {
inline constexpr int kRot = 0;
inline constexpr int kPos = 3;
inline constexpr int kVel = 6;
inline constexpr int kOmega = 9;
inline constexpr int kAcc = 12;
inline constexpr int kBiasGyro = 15;
inline constexpr int kBiasAcc = 18;
inline constexpr int kGravity = 21;
inline constexpr int kRotIl = 24;
inline constexpr int kPosIl = 27;
}  // namespace blk

using ErrorVector = Eigen::Matrix<double, kStateDim, 1>;
using Covariance = Eigen::Matrix<double, kStateDim, kStateDim>;

/// Full filter state: IMU pose/velocity in the world frame, body rates and
/// specific force, biases, gravity and the LiDAR-to-IMU extrinsics.
struct NavState {
  Mat3 rot_wi = Mat3::Identity();
  Vec3 pos_wi = Vec3::Zero();
  Vec3 vel_wi = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Vec3 acc = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
  Vec3 bias_acc = Vec3::Zero();
  Vec3 gravity_w = Vec3::Zero();
  Mat3 rot_il = Mat3::Identity();
  Vec3 pos_il = Vec3::Zero();

  bool all_finite() const;
  bool operator==(const NavState&) const = default;
};

/// Rotations compose on the right (R * exp(d)); vector blocks add.
NavState boxplus(const NavState& x, const ErrorVector& d);

/// The d with boxplus(x, d) == y.
ErrorVector boxminus(const NavState& y, const NavState& x);

/// Symmetrize in place: P <- (P + P^T) / 2.
void symmetrize(Covariance& p);

}  // namespace dmloc
