#pragma once

#include "dmloc/nav_state.hpp"

#include <deque>

namespace dmloc {

struct StampedState {
  double t = 0.0;
  NavState state;
  Covariance cov = Covariance::Identity();
};

class OutOfRangeError : public DataError {
 public:
  using DataError::DataError;
};

/// Time-ordered buffer of filter states used to look up the pose at any
/// instant inside a LiDAR sweep.
class StateHistory {
 public:
  /// horizon: how far behind the newest entry states are retained.
  /// extrapolation: how far past the newest entry query() may predict.
  explicit StateHistory(double horizon = 0.5, double extrapolation = 0.01);

  /// Appends; an entry with the same stamp as back() replaces it.
  void push(const StampedState& s);
  void replace_back(const StampedState& s);

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const StampedState& front() const { return entries_.front(); }
  const StampedState& back() const { return entries_.back(); }
  const std::deque<StampedState>& entries() const { return entries_; }

  /// Rotations interpolate along the geodesic, everything else linearly.
  /// Exact at stored stamps.
  NavState query(double t) const;

 private:
  void trim();

  std::deque<StampedState> entries_;
  double horizon_;
  double extrapolation_;
};

}  // namespace dmloc
