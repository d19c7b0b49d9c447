#include "dmloc/process_model.hpp"

#include "dmloc/so3.hpp"

namespace dmloc {

ErrorVector process_derivative(const NavState& x, double dt, const NoiseVector& w) {
  const Vec3 world_acc = x.rot_wi * (x.acc - x.bias_acc) + x.gravity_w;
  ErrorVector f = ErrorVector::Zero();
  f.segment<3>(blk::kRot) = x.omega - x.bias_gyro;
  f.segment<3>(blk::kPos) = x.vel_wi + 0.5 * world_acc * dt;
  f.segment<3>(blk::kVel) = world_acc;
  f.segment<3>(blk::kOmega) = w.segment<3>(0);
  f.segment<3>(blk::kAcc) = w.segment<3>(3);
  f.segment<3>(blk::kBiasGyro) = w.segment<3>(6);
  f.segment<3>(blk::kBiasAcc) = w.segment<3>(9);
  return f;
}

NavState transition(const NavState& x, double dt, const NoiseVector& w) {
  return boxplus(x, dt * process_derivative(x, dt, w));
}

TransitionJacobians transition_jacobians(const NavState& x, double dt) {
  TransitionJacobians j;
  j.fx.setIdentity();
  j.fw.setZero();

  const Vec3 u = (x.omega - x.bias_gyro) * dt;
  const Mat3 jr = so3::right_jacobian(u);
  const Vec3 specific = x.acc - x.bias_acc;
  const Mat3 r_skew = x.rot_wi * so3::hat(specific);
  const double half_dt2 = 0.5 * dt * dt;

  auto fx = [&j](int row, int col) { return j.fx.block<3, 3>(row, col); };

  fx(blk::kRot, blk::kRot) = so3::exp(u).transpose();
  fx(blk::kRot, blk::kOmega) = jr * dt;
  fx(blk::kRot, blk::kBiasGyro) = -jr * dt;

  fx(blk::kPos, blk::kRot) = -half_dt2 * r_skew;
  fx(blk::kPos, blk::kVel) = dt * Mat3::Identity();
  fx(blk::kPos, blk::kAcc) = half_dt2 * x.rot_wi;
  fx(blk::kPos, blk::kBiasAcc) = -half_dt2 * x.rot_wi;
  fx(blk::kPos, blk::kGravity) = half_dt2 * Mat3::Identity();

  fx(blk::kVel, blk::kRot) = -dt * r_skew;
  fx(blk::kVel, blk::kAcc) = dt * x.rot_wi;
  fx(blk::kVel, blk::kBiasAcc) = -dt * x.rot_wi;
  fx(blk::kVel, blk::kGravity) = dt * Mat3::Identity();

  j.fw.block<3, 3>(blk::kOmega, 0) = dt * Mat3::Identity();
  j.fw.block<3, 3>(blk::kAcc, 3) = dt * Mat3::Identity();
  j.fw.block<3, 3>(blk::kBiasGyro, 6) = dt * Mat3::Identity();
  j.fw.block<3, 3>(blk::kBiasAcc, 9) = dt * Mat3::Identity();
  return j;
}

}  // namespace dmloc
