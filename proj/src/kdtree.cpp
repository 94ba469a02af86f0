#include "pclv/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace pclv {
namespace {
constexpr std::uint32_t kLeafSize = 12;
}

KdTree::KdTree(std::span<const Vec3> points) {
  const auto n = static_cast<std::uint32_t>(points.size());
  index_.resize(n);
  std::iota(index_.begin(), index_.end(), 0u);
  points_.assign(points.begin(), points.end());
  nodes_.reserve(2 * (n / kLeafSize + 1));
  if (n > 0) build(0, n);

  // Store points in tree order so leaf scans are contiguous.
  std::vector<Vec3> ordered(n);
  for (std::uint32_t k = 0; k < n; ++k) ordered[k] = points[index_[k]];
  points_ = std::move(ordered);
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, -1, 0.0, -1});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[index_[begin]];
  Vec3 hi = lo;
  for (std::uint32_t k = begin + 1; k < end; ++k) {
    lo = lo.cwiseMin(points_[index_[k]]);
    hi = hi.cwiseMax(points_[index_[k]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as a leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[index_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

std::vector<Neighbor> KdTree::knn(const Vec3& q, std::size_t k, std::uint32_t exclude) const {
  std::vector<Neighbor> out;
  knn(q, k, exclude, out);
  return out;
}

void KdTree::knn(const Vec3& q, std::size_t k, std::uint32_t exclude,
                 std::vector<Neighbor>& out) const {
  out.clear();
  if (k == 0 || nodes_.empty()) return;
  out.reserve(k + 1);
  knn_recurse(0, q, k, exclude, out);
  std::sort_heap(out.begin(), out.end());
}

void KdTree::knn_recurse(std::int32_t id, const Vec3& q, std::size_t k, std::uint32_t exclude,
                         std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (std::uint32_t p = node.begin; p < node.end; ++p) {
      if (index_[p] == exclude) continue;
      const Neighbor cand{(points_[p] - q).squaredNorm(), index_[p]};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  knn_recurse(near, q, k, exclude, heap);
  // Points on the far side are at least |diff| away along the split axis.
  if (heap.size() < k || diff * diff <= heap.front().dist2) {
    knn_recurse(far, q, k, exclude, heap);
  }
}

std::vector<Neighbor> KdTree::radius(const Vec3& q, double radius) const {
  std::vector<Neighbor> out;
  if (nodes_.empty() || !(radius > 0.0)) return out;
  radius_recurse(0, q, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

void KdTree::radius_recurse(std::int32_t id, const Vec3& q, double r2,
                            std::vector<Neighbor>& out) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (std::uint32_t p = node.begin; p < node.end; ++p) {
      const double d2 = (points_[p] - q).squaredNorm();
      if (d2 < r2) out.push_back({d2, index_[p]});
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  radius_recurse(near, q, r2, out);
  if (diff * diff < r2) radius_recurse(far, q, r2, out);
}

}  // namespace pclv
