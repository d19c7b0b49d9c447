#include "dmloc/ikd_tree.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace dmloc {

struct IkdTree::Node {
  Vec3 point;
  int axis = 0;
  std::unique_ptr<Node> left;
  std::unique_ptr<Node> right;
  bool deleted = false;       // this node's point is a tombstone
  bool tree_deleted = false;  // whole subtree dead; children not yet told
  int size = 1;               // nodes in subtree, tombstones included
  int invalid = 0;            // tombstones in subtree
  Aabb box;                   // bounds of every node in the subtree
};

namespace {

using Node = IkdTree::Node;

int size_of(const std::unique_ptr<Node>& n) { return n ? n->size : 0; }
int invalid_of(const std::unique_ptr<Node>& n) { return n ? n->invalid : 0; }

void refresh_counts(Node& n) {
  n.size = 1 + size_of(n.left) + size_of(n.right);
  n.invalid = (n.deleted ? 1 : 0) + invalid_of(n.left) + invalid_of(n.right);
}

void kill_subtree(Node& n) {
  n.tree_deleted = true;
  n.deleted = true;
  n.invalid = n.size;
}

void push_down(Node& n) {
  if (!n.tree_deleted) return;
  if (n.left) kill_subtree(*n.left);
  if (n.right) kill_subtree(*n.right);
  n.tree_deleted = false;
}

void collect_live(std::unique_ptr<Node>& n, std::vector<Vec3>& out) {
  if (!n || n->invalid == n->size) return;
  push_down(*n);
  collect_live(n->left, out);
  if (!n->deleted) out.push_back(n->point);
  collect_live(n->right, out);
}

void collect_live_const(const Node* n, std::vector<Vec3>& out) {
  if (!n || n->invalid == n->size) return;
  collect_live_const(n->left.get(), out);
  if (!n->deleted) out.push_back(n->point);
  collect_live_const(n->right.get(), out);
}

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

std::unique_ptr<Node> build_balanced(std::vector<Vec3>& pts, std::size_t lo, std::size_t hi) {
  if (lo >= hi) return nullptr;
  Aabb box;
  for (std::size_t i = lo; i < hi; ++i) box.extend(pts[i]);
  int axis = 0;
  (box.max - box.min).maxCoeff(&axis);
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(pts.begin() + static_cast<std::ptrdiff_t>(lo),
                   pts.begin() + static_cast<std::ptrdiff_t>(mid),
                   pts.begin() + static_cast<std::ptrdiff_t>(hi),
                   [axis](const Vec3& a, const Vec3& b) {
                     if (a[axis] != b[axis]) return a[axis] < b[axis];
                     return lex_less(a, b);
                   });
  auto n = std::make_unique<Node>();
  n->point = pts[mid];
  n->axis = axis;
  n->box = box;
  n->size = static_cast<int>(hi - lo);
  n->left = build_balanced(pts, lo, mid);
  n->right = build_balanced(pts, mid + 1, hi);
  return n;
}

struct HeapEntry {
  double d2;
  Vec3 p;
};

struct HeapLess {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const {
    return neighbor_less(a.d2, a.p, b.d2, b.p);
  }
};

using KnnHeap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapLess>;

void search(const Node* n, const Vec3& q, std::size_t k, double max_d2, KnnHeap& heap) {
  if (!n || n->invalid == n->size) return;
  const double bound = heap.size() < k ? max_d2 : heap.top().d2;
  if (n->box.squared_distance(q) > bound) return;
  if (!n->deleted) {
    const double d2 = squared_distance(n->point, q);
    if (d2 <= max_d2) {
      if (heap.size() < k) {
        heap.push({d2, n->point});
      } else if (neighbor_less(d2, n->point, heap.top().d2, heap.top().p)) {
        heap.pop();
        heap.push({d2, n->point});
      }
    }
  }
  const bool go_left = q[n->axis] < n->point[n->axis];
  const Node* near = go_left ? n->left.get() : n->right.get();
  const Node* far = go_left ? n->right.get() : n->left.get();
  search(near, q, k, max_d2, heap);
  search(far, q, k, max_d2, heap);
}

std::size_t count_nodes(const Node* n) { return n ? static_cast<std::size_t>(n->size) : 0; }

}  // namespace

IkdTree::IkdTree() : IkdTree(Options{}) {}
IkdTree::IkdTree(Options opt) : opt_(opt) {}
IkdTree::~IkdTree() = default;
IkdTree::IkdTree(IkdTree&&) noexcept = default;
IkdTree& IkdTree::operator=(IkdTree&&) noexcept = default;

void IkdTree::build(std::span<const Vec3> pts) {
  root_.reset();
  std::vector<Vec3> sorted(pts.begin(), pts.end());
  std::sort(sorted.begin(), sorted.end(), lex_less);
  // Collapse exact repeats first, then near-duplicates through the tree.
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (opt_.duplicate_eps > 0.0) {
    std::vector<Vec3> kept;
    kept.reserve(sorted.size());
    for (const auto& p : sorted) {
      bool dup = false;
      for (auto it = kept.rbegin(); it != kept.rend() && p.x() - it->x() <= opt_.duplicate_eps; ++it) {
        if (squared_distance(p, *it) <= opt_.duplicate_eps * opt_.duplicate_eps) {
          dup = true;
          break;
        }
      }
      if (!dup) kept.push_back(p);
    }
    sorted.swap(kept);
  }
  root_ = build_balanced(sorted, 0, sorted.size());
}

bool IkdTree::needs_rebuild(const Node& n) const {
  if (n.size < opt_.min_rebuild_size) return false;
  if (n.invalid > opt_.delete_alpha * n.size) return true;
  const double limit = opt_.balance_alpha * (n.size - 1);
  return size_of(n.left) > limit || size_of(n.right) > limit;
}

void IkdTree::rebuild(std::unique_ptr<Node>& slot) {
  std::vector<Vec3> live;
  live.reserve(static_cast<std::size_t>(slot->size - slot->invalid));
  collect_live(slot, live);
  slot = build_balanced(live, 0, live.size());
  ++rebuilds_;
}

bool IkdTree::insert(const Vec3& p) {
  if (!p.allFinite()) return false;
  if (opt_.duplicate_eps >= 0.0 && !knn(p, 1, opt_.duplicate_eps).empty()) return false;

  std::vector<std::unique_ptr<Node>*> path;
  std::unique_ptr<Node>* slot = &root_;
  int axis = 0;
  while (*slot) {
    Node& n = **slot;
    push_down(n);
    path.push_back(slot);
    ++n.size;
    n.box.extend(p);
    axis = (n.axis + 1) % 3;
    slot = p[n.axis] < n.point[n.axis] ? &n.left : &n.right;
  }
  auto leaf = std::make_unique<Node>();
  leaf->point = p;
  leaf->axis = axis;
  leaf->box.extend(p);
  *slot = std::move(leaf);

  // Rebuild the highest violating subtree on the insertion path. Dropped
  // tombstones shrink it, which can unbalance an ancestor, so the remaining
  // path is refreshed and checked again.
  std::size_t end = path.size();
  while (true) {
    std::size_t i = 0;
    while (i < end && !needs_rebuild(**path[i])) ++i;
    if (i == end) break;
    rebuild(*path[i]);
    end = i;
    for (std::size_t j = end; j-- > 0;) refresh_counts(**path[j]);
  }
  return true;
}

std::size_t IkdTree::insert(std::span<const Vec3> pts) {
  std::size_t added = 0;
  for (const auto& p : pts) added += insert(p) ? 1 : 0;
  return added;
}

std::size_t IkdTree::delete_rec(std::unique_ptr<Node>& slot, const Aabb& box) {
  if (!slot) return 0;
  Node& n = *slot;
  if (n.invalid == n.size || !box.intersects(n.box)) return 0;
  if (box.contains(n.box)) {
    const auto removed = static_cast<std::size_t>(n.size - n.invalid);
    kill_subtree(n);
    return removed;
  }
  push_down(n);
  std::size_t removed = 0;
  if (!n.deleted && box.contains(n.point)) {
    n.deleted = true;
    ++removed;
  }
  removed += delete_rec(n.left, box);
  removed += delete_rec(n.right, box);
  refresh_counts(n);
  if (needs_rebuild(n)) rebuild(slot);
  return removed;
}

std::size_t IkdTree::delete_box(const Aabb& box) {
  if (box.empty()) return 0;
  const std::size_t removed = delete_rec(root_, box);
  if (root_ && root_->invalid == root_->size) {
    root_.reset();
    ++rebuilds_;
  }
  return removed;
}

std::vector<Neighbor> IkdTree::knn(const Vec3& q, int k, double max_dist) const {
  std::vector<Neighbor> out;
  if (k <= 0 || !root_) return out;
  const double max_d2 = std::isinf(max_dist) ? max_dist : max_dist * max_dist;
  KnnHeap heap;
  search(root_.get(), q, static_cast<std::size_t>(k), max_d2, heap);
  out.resize(heap.size());
  for (auto i = static_cast<std::ptrdiff_t>(heap.size()) - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = Neighbor{heap.top().p, std::sqrt(heap.top().d2)};
    heap.pop();
  }
  return out;
}

std::size_t IkdTree::size() const {
  return root_ ? static_cast<std::size_t>(root_->size - root_->invalid) : 0;
}

std::size_t IkdTree::node_count() const { return count_nodes(root_.get()); }

std::vector<Vec3> IkdTree::points() const {
  std::vector<Vec3> out;
  out.reserve(size());
  collect_live_const(root_.get(), out);
  return out;
}

bool IkdTree::balanced() const {
  std::vector<const Node*> stack;
  if (root_) stack.push_back(root_.get());
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n->invalid == n->size) continue;  // dead subtree, reclaimed with its parent
    if (needs_rebuild(*n)) return false;
    if (n->left) stack.push_back(n->left.get());
    if (n->right) stack.push_back(n->right.get());
  }
  return true;
}

}  // namespace dmloc
