#pragma once

#include "dmloc/ikd_tree.hpp"

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

namespace dmloc {

/// Keeps every stride-th element, starting with the first.
template <class T>
std::vector<T> interval_downsample(const std::vector<T>& in, int stride) {
  if (stride <= 1) return in;
  std::vector<T> out;
  out.reserve(in.size() / static_cast<std::size_t>(stride) + 1);
  for (std::size_t i = 0; i < in.size(); i += static_cast<std::size_t>(stride)) out.push_back(in[i]);
  return out;
}

/// Static world-frame map. Immutable once constructed.
class PriorMap {
 public:
  PriorMap() = default;
  explicit PriorMap(std::vector<Vec3> points, int stride = 1);

  const std::vector<Vec3>& points() const { return points_; }
  const Aabb& bounds() const { return bounds_; }
  const IkdTree& index() const { return index_; }
  std::size_t size() const { return points_.size(); }

  /// FNV-1a over the raw coordinates; stable across runs.
  std::uint64_t checksum() const;

 private:
  std::vector<Vec3> points_;
  Aabb bounds_;
  IkdTree index_;
};

enum class MapFormat { kText, kBinary };

/// PM1 text or PMB1 binary, detected from the leading magic.
std::vector<Vec3> read_map_points(const std::filesystem::path& path);
void write_map_points(const std::filesystem::path& path, const std::vector<Vec3>& pts,
                      MapFormat format);

/// read_map_points + interval downsampling + indexing.
PriorMap load_prior(const std::filesystem::path& path, int stride = 1);

/// Sliding map built online from corrected scans; one point per voxel.
class LocalMap {
 public:
  struct Options {
    double radius = 150.0;
    double voxel = 0.5;
  };

  LocalMap();
  explicit LocalMap(Options opt);

  /// Returns the number of points added (at most one per empty voxel).
  std::size_t insert(const std::vector<Vec3>& world_pts);

  /// Drops everything outside the cube of half-side radius around center.
  std::size_t prune(const Vec3& center);

  /// True once the pose has moved more than radius / 2 from the last prune center.
  bool needs_prune(const Vec3& pose) const;

  const IkdTree& index() const { return tree_; }
  const Vec3& center() const { return center_; }
  std::size_t size() const { return tree_.size(); }
  const Options& options() const { return opt_; }

 private:
  struct KeyHash {
    std::size_t operator()(const Eigen::Vector3i& k) const;
  };
  struct KeyEq {
    bool operator()(const Eigen::Vector3i& a, const Eigen::Vector3i& b) const { return a == b; }
  };

  Eigen::Vector3i key_of(const Vec3& p) const;

  Options opt_;
  IkdTree tree_;
  std::unordered_map<Eigen::Vector3i, Vec3, KeyHash, KeyEq> voxels_;
  Vec3 center_ = Vec3::Zero();
  bool has_center_ = false;
};

/// Profile of objects considered movable (vehicles, people) in a map.
struct MovableProfile {
  double ground_z = 0.0;
  double ground_tolerance = 0.2;
  double cell = 0.5;           ///< xy grid used for clustering
  double min_height = 0.5;     ///< above ground
  double max_height = 2.2;
  double max_length = 6.0;     ///< longer footprint side
  double max_width = 2.5;      ///< shorter footprint side
};

/// Removes above-ground clusters whose height and footprint match the profile.
std::vector<Vec3> remove_dynamic_objects(const std::vector<Vec3>& pts, const MovableProfile& profile);

}  // namespace dmloc
