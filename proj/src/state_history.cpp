#include "dmloc/state_history.hpp"

#include "dmloc/process_model.hpp"
#include "dmloc/so3.hpp"

#include <algorithm>
#include <string>

namespace dmloc {
namespace {

NavState interpolate(const NavState& a, const NavState& b, double s) {
  NavState x;
  x.rot_wi = so3::slerp(a.rot_wi, b.rot_wi, s);
  x.pos_wi = a.pos_wi + s * (b.pos_wi - a.pos_wi);
  x.vel_wi = a.vel_wi + s * (b.vel_wi - a.vel_wi);
  x.omega = a.omega + s * (b.omega - a.omega);
  x.acc = a.acc + s * (b.acc - a.acc);
  x.bias_gyro = a.bias_gyro + s * (b.bias_gyro - a.bias_gyro);
  x.bias_acc = a.bias_acc + s * (b.bias_acc - a.bias_acc);
  x.gravity_w = a.gravity_w + s * (b.gravity_w - a.gravity_w);
  x.rot_il = so3::slerp(a.rot_il, b.rot_il, s);
  x.pos_il = a.pos_il + s * (b.pos_il - a.pos_il);
  return x;
}

}  // namespace

StateHistory::StateHistory(double horizon, double extrapolation)
    : horizon_(horizon), extrapolation_(extrapolation) {}

void StateHistory::push(const StampedState& s) {
  if (!entries_.empty()) {
    if (s.t < entries_.back().t) {
      throw DataError("state history push out of order at t=" + std::to_string(s.t));
    }
    if (s.t == entries_.back().t) {
      entries_.back() = s;
      return;
    }
  }
  entries_.push_back(s);
  trim();
}

void StateHistory::replace_back(const StampedState& s) {
  if (entries_.empty()) {
    entries_.push_back(s);
  } else {
    entries_.back() = s;
  }
}

void StateHistory::trim() {
  // Keep one entry at or before the horizon so the window stays bracketed.
  const double cutoff = entries_.back().t - horizon_;
  while (entries_.size() > 2 && entries_[1].t <= cutoff) entries_.pop_front();
}

NavState StateHistory::query(double t) const {
  if (entries_.empty()) throw OutOfRangeError("state history is empty");
  const auto& newest = entries_.back();
  if (t > newest.t) {
    if (t - newest.t > extrapolation_) {
      throw OutOfRangeError("t=" + std::to_string(t) + " is past the newest state " +
                            std::to_string(newest.t));
    }
    return transition(newest.state, t - newest.t);
  }
  if (t < entries_.front().t) {
    throw OutOfRangeError("t=" + std::to_string(t) + " predates the oldest state " +
                          std::to_string(entries_.front().t));
  }
  auto it = std::lower_bound(entries_.begin(), entries_.end(), t,
                             [](const StampedState& s, double v) { return s.t < v; });
  if (it->t == t) return it->state;
  const auto& hi = *it;
  const auto& lo = *std::prev(it);
  const double s = (t - lo.t) / (hi.t - lo.t);
  return interpolate(lo.state, hi.state, s);
}

}  // namespace dmloc
