#pragma once

#include "dmloc/types.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace dmloc {

struct Neighbor {
  Vec3 point;
  double dist = 0.0;
};

/// Incremental k-d tree with tombstone deletion and lazy rebuilding.
///
/// Subtrees are rebuilt when one child holds more than balance_alpha of the
/// nodes or when more than delete_alpha of the nodes are tombstones. Every
/// node keeps the bounding box of its subtree, so searches prune on boxes
/// and never depend on the split planes being tight.
class IkdTree {
 public:
  struct Options {
    double balance_alpha = 0.6;
    double delete_alpha = 0.5;
    int min_rebuild_size = 16;
    double duplicate_eps = 1e-7;
  };

  IkdTree();
  explicit IkdTree(Options opt);
  ~IkdTree();
  IkdTree(IkdTree&&) noexcept;
  IkdTree& operator=(IkdTree&&) noexcept;
  IkdTree(const IkdTree&) = delete;
  IkdTree& operator=(const IkdTree&) = delete;

  /// Replaces the contents with a balanced tree over pts (duplicates collapsed).
  void build(std::span<const Vec3> pts);

  /// Returns the number of points actually added.
  std::size_t insert(std::span<const Vec3> pts);
  bool insert(const Vec3& p);

  /// Removes every live point inside the box; returns how many.
  std::size_t delete_box(const Aabb& box);

  /// The k nearest live points within max_dist, ascending by distance, ties
  /// broken by (x, y, z). Exact.
  std::vector<Neighbor> knn(const Vec3& q, int k,
                            double max_dist = std::numeric_limits<double>::infinity()) const;

  std::size_t size() const;        ///< live points
  std::size_t node_count() const;  ///< live + tombstoned
  std::size_t rebuild_count() const { return rebuilds_; }
  std::vector<Vec3> points() const;

  /// True when no subtree of at least min_rebuild_size violates the rebuild
  /// criterion. Used by tests.
  bool balanced() const;

  const Options& options() const { return opt_; }

  struct Node;

 private:
  std::unique_ptr<Node> root_;
  Options opt_;
  std::size_t rebuilds_ = 0;

  bool needs_rebuild(const Node& n) const;
  void rebuild(std::unique_ptr<Node>& slot);
  std::size_t delete_rec(std::unique_ptr<Node>& slot, const Aabb& box);
};

/// Lexicographic tie-break key used by knn and the brute-force references.
inline bool neighbor_less(double d2a, const Vec3& a, double d2b, const Vec3& b) {
  if (d2a != d2b) return d2a < d2b;
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace dmloc
