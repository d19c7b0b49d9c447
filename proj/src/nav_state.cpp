#include "dmloc/nav_state.hpp"

#include "dmloc/so3.hpp"

namespace dmloc {

bool NavState::all_finite() const {
  return rot_wi.allFinite() && pos_wi.allFinite() && vel_wi.allFinite() && omega.allFinite() &&
         acc.allFinite() && bias_gyro.allFinite() && bias_acc.allFinite() &&
         gravity_w.allFinite() && rot_il.allFinite() && pos_il.allFinite();
}

NavState boxplus(const NavState& x, const ErrorVector& d) {
  NavState y;
  y.rot_wi = x.rot_wi * so3::exp(d.segment<3>(blk::kRot));
  y.pos_wi = x.pos_wi + d.segment<3>(blk::kPos);
  y.vel_wi = x.vel_wi + d.segment<3>(blk::kVel);
  y.omega = x.omega + d.segment<3>(blk::kOmega);
  y.acc = x.acc + d.segment<3>(blk::kAcc);
  y.bias_gyro = x.bias_gyro + d.segment<3>(blk::kBiasGyro);
  y.bias_acc = x.bias_acc + d.segment<3>(blk::kBiasAcc);
  y.gravity_w = x.gravity_w + d.segment<3>(blk::kGravity);
  y.rot_il = x.rot_il * so3::exp(d.segment<3>(blk::kRotIl));
  y.pos_il = x.pos_il + d.segment<3>(blk::kPosIl);
  return y;
}

ErrorVector boxminus(const NavState& y, const NavState& x) {
  ErrorVector d;
  d.segment<3>(blk::kRot) = so3::log(x.rot_wi.transpose() * y.rot_wi);
  d.segment<3>(blk::kPos) = y.pos_wi - x.pos_wi;
  d.segment<3>(blk::kVel) = y.vel_wi - x.vel_wi;
  d.segment<3>(blk::kOmega) = y.omega - x.omega;
  d.segment<3>(blk::kAcc) = y.acc - x.acc;
  d.segment<3>(blk::kBiasGyro) = y.bias_gyro - x.bias_gyro;
  d.segment<3>(blk::kBiasAcc) = y.bias_acc - x.bias_acc;
  d.segment<3>(blk::kGravity) = y.gravity_w - x.gravity_w;
  d.segment<3>(blk::kRotIl) = so3::log(x.rot_il.transpose() * y.rot_il);
  d.segment<3>(blk::kPosIl) = y.pos_il - x.pos_il;
  return d;
}

void symmetrize(Covariance& p) {
  const Covariance t = p.transpose();
  p = 0.5 * (p + t);
}

}  // namespace dmloc
