#include "dmloc/map.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace dmloc {

std::vector<Vec3> remove_dynamic_objects(const std::vector<Vec3>& pts, const MovableProfile& profile) {
  using Cell = std::pair<long, long>;
  auto cell_of = [&profile](const Vec3& p) {
    return Cell{static_cast<long>(std::floor(p.x() / profile.cell)),
                static_cast<long>(std::floor(p.y() / profile.cell))};
  };

  // Occupied cells of above-ground points. std::map keeps the labelling deterministic.
  std::map<Cell, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].z() > profile.ground_z + profile.ground_tolerance) cells[cell_of(pts[i])].push_back(i);
  }

  std::map<Cell, int> label;
  std::vector<bool> drop(pts.size(), false);
  int next_label = 0;
  for (const auto& [seed, unused] : cells) {
    if (label.count(seed)) continue;
    // Flood fill over 8-connected occupied cells.
    std::vector<Cell> component{seed};
    label[seed] = next_label;
    for (std::size_t head = 0; head < component.size(); ++head) {
      const auto [cx, cy] = component[head];
      for (long dx = -1; dx <= 1; ++dx) {
        for (long dy = -1; dy <= 1; ++dy) {
          const Cell nb{cx + dx, cy + dy};
          if (cells.count(nb) && !label.count(nb)) {
            label[nb] = next_label;
            component.push_back(nb);
          }
        }
      }
    }
    ++next_label;

    Aabb box;
    for (const auto& c : component) {
      for (auto i : cells.at(c)) box.extend(pts[i]);
    }
    const double height = box.max.z() - profile.ground_z;
    const double ex = box.max.x() - box.min.x();
    const double ey = box.max.y() - box.min.y();
    const bool movable = height >= profile.min_height && height <= profile.max_height &&
                         std::max(ex, ey) <= profile.max_length &&
                         std::min(ex, ey) <= profile.max_width;
    if (!movable) continue;
    for (const auto& c : component) {
      for (auto i : cells.at(c)) drop[i] = true;
    }
  }

  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!drop[i]) out.push_back(pts[i]);
  }
  return out;
}

}  // namespace dmloc
